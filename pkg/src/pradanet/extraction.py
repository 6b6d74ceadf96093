"""From a sparse network to additive-model components.

Live hidden nodes are grouped by the set of inputs they read from; each
distinct set is one additive component. A postprocessing pass detects
inputs a component depends on only linearly (the partial derivative is
close to constant across the data) and splits them off into explicit
linear terms, which keeps components as simple as the fit allows.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, StandardizationStats
from .errors import PradaNetError
from .network import NetworkParams, hidden_activations, predict


@dataclass(frozen=True)
class AdditiveComponent:
    """One extracted function: which inputs it reads, which hidden nodes
    realize it, and any split-off linear slopes (one per variable)."""

    support: tuple[int, ...]
    node_indices: tuple[int, ...]
    linear_terms: dict = field(default_factory=dict)

    @property
    def complexity(self) -> int:
        # a linear term counts as one node, matching node-count reporting
        return len(self.node_indices) + len(self.linear_terms)

    def label(self, column_names=None) -> str:
        if column_names is None:
            names = [f"x{d + 1}" for d in self.support]
        else:
            names = [column_names[d] for d in self.support]
        return "f(" + ",".join(names) + ")"


def group_nodes(params: NetworkParams) -> list[AdditiveComponent]:
    """Partition live hidden nodes by their nonzero-input support sets.

    Dead nodes (zero output weight or all-zero input row) are dropped.
    Requires exact zeros, which the proximal stage produces.
    """
    dead = params.dead_nodes()
    groups: dict[tuple[int, ...], list[int]] = {}
    for h in range(params.n_hidden):
        if dead[h]:
            continue
        support = tuple(np.nonzero(params.input_weights[h])[0].tolist())
        groups.setdefault(support, []).append(h)
    components = [
        AdditiveComponent(support=support, node_indices=tuple(nodes))
        for support, nodes in groups.items()
    ]
    components.sort(key=lambda c: (len(c.support), c.support))
    return components


def evaluate_component(
    component: AdditiveComponent, params: NetworkParams, X: np.ndarray
) -> np.ndarray:
    """Raw (uncentered) component value at each row of X.

    The params must be the network the component was extracted from;
    linear terms are added on top of the tanh nodes.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.n_inputs:
        raise PradaNetError(
            f"input has {X.shape[1]} columns, network expects {params.n_inputs}"
        )
    vals = np.zeros(X.shape[0])
    if component.node_indices:
        nodes = list(component.node_indices)
        T = np.tanh(X @ params.input_weights[nodes].T + params.input_biases[nodes])
        vals = T @ params.output_weights[nodes]
    for d, slope in component.linear_terms.items():
        vals = vals + slope * X[:, d]
    return vals


def remove_dead_nodes(params: NetworkParams) -> NetworkParams:
    """Drop dead hidden nodes, folding any constant contribution
    (zero-input nodes with nonzero output weight) into the output bias."""
    dead = params.dead_nodes()
    keep = ~dead
    constant = float(
        np.sum(params.output_weights[dead] * np.tanh(params.input_biases[dead]))
    )
    if not np.any(keep):
        keep = np.zeros(params.n_hidden, dtype=bool)
        keep[0] = True  # keep one dead node; H >= 1 is required
        return NetworkParams(
            input_weights=np.zeros_like(params.input_weights[:1]),
            input_biases=np.zeros(1),
            output_weights=np.zeros(1),
            output_bias=params.output_bias + constant,
        )
    return NetworkParams(
        input_weights=params.input_weights[keep],
        input_biases=params.input_biases[keep],
        output_weights=params.output_weights[keep],
        output_bias=params.output_bias + constant,
    )


def component_derivatives(
    component: AdditiveComponent, params: NetworkParams, X: np.ndarray
) -> np.ndarray:
    """Analytic partial derivatives of the tanh part, one column per
    support variable: shape (N, |support|)."""
    nodes = list(component.node_indices)
    sup = list(component.support)
    if not nodes:
        out = np.zeros((X.shape[0], len(sup)))
        for k, d in enumerate(sup):
            out[:, k] = component.linear_terms.get(d, 0.0)
        return out
    T = np.tanh(X @ params.input_weights[nodes].T + params.input_biases[nodes])
    dfac = (1.0 - T * T) * params.output_weights[nodes]
    out = dfac @ params.input_weights[np.ix_(nodes, sup)]
    for k, d in enumerate(sup):
        if d in component.linear_terms:
            out[:, k] += component.linear_terms[d]
    return out


def split_linear_terms(
    components: list[AdditiveComponent],
    params: NetworkParams,
    data: Dataset,
    sigma2_max: float = 0.01,
) -> tuple[list[AdditiveComponent], NetworkParams]:
    """Move near-linear inputs out of tanh components into linear terms.

    For every component and support variable, the analytic partial
    derivative is evaluated on the data; when its sample variance falls
    below sigma2_max the variable's input weights are zeroed, a linear
    term with slope = mean derivative is recorded, and the output bias
    absorbs the induced mean shift. Decisions are made from the original
    fit for all variables at once. Returns the updated component list
    and the modified network; the modification changes predictions only
    within the linearization error.
    """
    X = data.X
    W = params.input_weights.copy()
    w_out = params.output_weights.copy()
    b_in = params.input_biases.copy()
    bias_shift = 0.0
    kept: list[AdditiveComponent] = []
    shed_slopes: dict[int, float] = {}
    shed_counts: dict[int, int] = {}

    for comp in components:
        nodes = list(comp.node_indices)
        sup = list(comp.support)
        derivs = component_derivatives(comp, params, X)
        variances = derivs.var(axis=0, ddof=1)
        shed = [d for k, d in enumerate(sup) if variances[k] < sigma2_max]
        if not shed or not nodes:
            kept.append(comp)
            continue
        slopes = {d: float(derivs[:, sup.index(d)].mean()) for d in shed}
        old_vals = evaluate_component(comp, params, X)
        for h in nodes:
            W[h, shed] = 0.0
        remaining = tuple(d for d in sup if d not in shed)
        linear_part = sum(slopes[d] * X[:, d] for d in shed)
        if remaining:
            T2 = np.tanh(X @ W[nodes].T + b_in[nodes])
            new_vals = T2 @ w_out[nodes] + linear_part
            kept.append(replace(comp, support=remaining))
        else:
            # nodes now compute constants; fold them away entirely
            w_out[nodes] = 0.0
            new_vals = linear_part
        bias_shift += float(np.mean(old_vals - new_vals))
        for d, s in slopes.items():
            shed_slopes[d] = shed_slopes.get(d, 0.0) + s
            shed_counts[d] = shed_counts.get(d, 0) + 1

    new_params = NetworkParams(
        input_weights=W,
        input_biases=b_in,
        output_weights=w_out,
        output_bias=params.output_bias + bias_shift,
    )

    # Merge each shed variable into an existing single-variable component
    # or add a fresh linear one.
    final: list[AdditiveComponent] = []
    merged = set()
    for comp in kept:
        if len(comp.support) == 1 and comp.support[0] in shed_slopes:
            d = comp.support[0]
            terms = dict(comp.linear_terms)
            terms[d] = terms.get(d, 0.0) + shed_slopes[d]
            final.append(replace(comp, linear_terms=terms))
            merged.add(d)
        else:
            final.append(comp)
    for d, slope in shed_slopes.items():
        if d not in merged:
            final.append(
                AdditiveComponent(support=(d,), node_indices=(), linear_terms={d: slope})
            )
    final.sort(key=lambda c: (len(c.support), c.support))
    return final, new_params


def variable_importance(
    params: NetworkParams, data: Dataset, original_scale: bool = False
) -> np.ndarray:
    """Mean absolute partial derivative of the prediction per input.

    A variable with an all-zero input-weight column scores exactly 0.
    With original_scale=True the derivative is mapped back to raw units
    using the stored standardization statistics.
    """
    T = hidden_activations(params, data.X)
    dfac = (1.0 - T * T) * params.output_weights  # (N, H)
    jac = dfac @ params.input_weights  # (N, D)
    imp = np.abs(jac).mean(axis=0)
    if original_scale:
        imp = imp * data.stats.y_sd / data.stats.x_sd
    return imp


def partial_dependence_grid(
    component: AdditiveComponent,
    params: NetworkParams,
    variable: int,
    grid: np.ndarray | None = None,
    n_points: int = 101,
    fixed: dict | None = None,
    data: Dataset | None = None,
    marginal: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean-centered curve of the component along one support variable.

    Other support variables are held at `fixed` values (default +1), or
    averaged over the observed rows when marginal=True (which requires
    `data`). The grid defaults to n_points equispaced values over the
    observed standardized range of the variable.
    """
    if variable not in component.support:
        raise PradaNetError(f"variable {variable} is not in the component support")
    if grid is None:
        if data is None:
            grid = np.linspace(-1.0, 1.0, n_points)
        else:
            col = data.X[:, variable]
            grid = np.linspace(col.min(), col.max(), n_points)
    grid = np.asarray(grid, dtype=np.float64)
    others = [d for d in component.support if d != variable]

    if marginal:
        if data is None:
            raise PradaNetError("marginal curves need the dataset")
        values = np.empty(len(grid))
        Xwork = data.X.copy()
        for i, g in enumerate(grid):
            Xwork[:, variable] = g
            values[i] = float(evaluate_component(component, params, Xwork).mean())
    else:
        fixed = dict(fixed or {})
        X = np.zeros((len(grid), params.n_inputs))
        for d in others:
            X[:, d] = fixed.get(d, 1.0)
        X[:, variable] = grid
        values = evaluate_component(component, params, X)
    return grid, values - values.mean()


@dataclass
class PartialDependenceCurve:
    component_index: int
    variable: int
    fixed: dict
    marginal: bool
    x: np.ndarray
    values: np.ndarray


@dataclass
class ExtractionReport:
    """Additive-model view of a trained network.

    The partition identity holds exactly: the sum of raw component
    evaluations plus output_bias equals the prediction of `params`
    (post-split network plus linear terms).
    """

    params: NetworkParams
    components: list[AdditiveComponent]
    output_bias: float
    importance: np.ndarray
    importance_original_scale: np.ndarray
    curves: list[PartialDependenceCurve]
    column_names: list[str]

    def model_prediction(self, X: np.ndarray) -> np.ndarray:
        """Post-split model: network plus split-off linear terms."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = predict(self.params, X)
        for comp in self.components:
            for d, slope in comp.linear_terms.items():
                out = out + slope * X[:, d]
        return out

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "output_bias": float(self.output_bias),
            "column_names": list(self.column_names),
            "importance": [float(v) for v in self.importance],
            "importance_original_scale": [
                float(v) for v in self.importance_original_scale
            ],
            "components": [
                {
                    "support": list(c.support),
                    "node_indices": list(c.node_indices),
                    "linear_terms": {str(k): float(v) for k, v in c.linear_terms.items()},
                    "complexity": c.complexity,
                    "label": c.label(self.column_names),
                }
                for c in self.components
            ],
            "curves": [
                {
                    "component_index": c.component_index,
                    "variable": c.variable,
                    "fixed": {str(k): float(v) for k, v in c.fixed.items()},
                    "marginal": c.marginal,
                    "x": [float(v) for v in c.x],
                    "values": [float(v) for v in c.values],
                }
                for c in self.curves
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExtractionReport":
        return cls(
            params=NetworkParams.from_dict(d["params"]),
            components=[
                AdditiveComponent(
                    support=tuple(c["support"]),
                    node_indices=tuple(c["node_indices"]),
                    linear_terms={int(k): float(v) for k, v in c["linear_terms"].items()},
                )
                for c in d["components"]
            ],
            output_bias=float(d["output_bias"]),
            importance=np.asarray(d["importance"], dtype=np.float64),
            importance_original_scale=np.asarray(
                d["importance_original_scale"], dtype=np.float64
            ),
            curves=[
                PartialDependenceCurve(
                    component_index=int(c["component_index"]),
                    variable=int(c["variable"]),
                    fixed={int(k): float(v) for k, v in c["fixed"].items()},
                    marginal=bool(c["marginal"]),
                    x=np.asarray(c["x"], dtype=np.float64),
                    values=np.asarray(c["values"], dtype=np.float64),
                )
                for c in d["curves"]
            ],
            column_names=list(d["column_names"]),
        )


def build_report(
    params: NetworkParams,
    data: Dataset,
    sigma2_max: float = 0.01,
    split_linear: bool = True,
    n_grid: int = 101,
    co_values: tuple = (-1.0, 1.0),
    marginal: bool = False,
) -> ExtractionReport:
    """Group nodes, optionally split linear terms, and tabulate curves.

    Variable importance is computed from the network before the linear
    split so that it reflects the model actually fitted.
    """
    importance = variable_importance(params, data)
    importance_orig = variable_importance(params, data, original_scale=True)
    components = group_nodes(params)
    if split_linear:
        components, params = split_linear_terms(components, params, data, sigma2_max)
    curves = []
    for ci, comp in enumerate(components):
        for variable in comp.support:
            others = [d for d in comp.support if d != variable]
            if marginal and others:
                x, v = partial_dependence_grid(
                    comp, params, variable, n_points=n_grid, data=data, marginal=True
                )
                curves.append(
                    PartialDependenceCurve(ci, variable, {}, True, x, v)
                )
            elif not others:
                x, v = partial_dependence_grid(
                    comp, params, variable, n_points=n_grid, data=data
                )
                curves.append(
                    PartialDependenceCurve(ci, variable, {}, False, x, v)
                )
            else:
                for cv in co_values:
                    fixed = {d: float(cv) for d in others}
                    x, v = partial_dependence_grid(
                        comp, params, variable, n_points=n_grid, fixed=fixed, data=data
                    )
                    curves.append(
                        PartialDependenceCurve(ci, variable, fixed, False, x, v)
                    )
    return ExtractionReport(
        params=params,
        components=components,
        output_bias=float(params.output_bias),
        importance=importance,
        importance_original_scale=importance_orig,
        curves=curves,
        column_names=list(data.column_names),
    )
