"""Clipped-linear Schmitt-Trigger model operations.

The model has a single canonical derivative field

    V_out' = (clip(A·((1−k)V_R + k·V_out − V_in), −M, +M) − V_out) / τ0

and every regional form (rest lines γ1/γ2/γ3, time constants τ1/τ2/τ3) is
derived from it. All functions are pure and accept scalars or numpy arrays
where noted.
"""

import logging
from typing import Literal, Tuple, Union

import numpy as np
from pydantic import ValidationError

from stmeta.core.errors import ModelParameterError, OutOfRegionError
from stmeta.models.cmos import PhaseMap
from stmeta.models.st_model import Geometry, Region, StModel

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def is_bistable(gain_a: float, feedback_k: float) -> bool:
    """True when k·A > 1 (hysteresis exists)."""
    return gain_a * feedback_k > 1.0


def build_model(**params) -> StModel:
    """
    Construct an StModel, reporting invalid parameters as ModelParameterError.

    Raises:
        ModelParameterError: Parameters out of range or k·A ≤ 1
    """
    try:
        return StModel(**params)
    except ValidationError as e:
        messages = "; ".join(err["msg"] for err in e.errors())
        raise ModelParameterError(
            f"Invalid model parameters: {messages}", details={"params": params}
        ) from e


def effective_gain(model: StModel) -> float:
    """κ = k − 1/A, the inverse slope of γ2."""
    return model.feedback_k - 1.0 / model.gain_a


def derive_geometry(model: StModel) -> Geometry:
    """
    Rest lines, time constants and thresholds of the model.

    Args:
        model: Validated model parameters

    Returns:
        Geometry: γ1 = M, γ3 = −M, τ1 = τ3 = τ0, τ2 = τ0/(kA−1) and
        V_H/V_L = (1−k)V_R ± M(k − 1/A)
    """
    kappa = effective_gain(model)
    shift = (1.0 - model.feedback_k) * model.ref_v
    m = model.saturation_m
    v_h = shift + m * kappa
    v_l = shift - m * kappa
    geometry = Geometry(
        gamma1=m,
        gamma3=-m,
        tau1=model.tau0,
        tau2=model.tau0 / (model.feedback_k * model.gain_a - 1.0),
        tau3=model.tau0,
        v_h=v_h,
        v_l=v_l,
        hysteresis=v_h - v_l,
        gamma2_slope_alpha=1.0 / kappa,
    )
    logger.debug(f"Derived geometry: {geometry}")
    return geometry


def unclipped_output(model: StModel, v_in: ArrayLike, v_out: ArrayLike) -> ArrayLike:
    """A·((1−k)V_R + k·v_out − v_in) before saturation."""
    k = model.feedback_k
    return model.gain_a * ((1.0 - k) * model.ref_v + k * v_out - v_in)


def amp_output(model: StModel, v_in: ArrayLike, v_out: ArrayLike) -> ArrayLike:
    """Amplifier output clipped to [−M, +M]."""
    m = model.saturation_m
    out = np.clip(unclipped_output(model, v_in, v_out), -m, m)
    return float(out) if np.ndim(out) == 0 else out


def derivative_field(model: StModel, v_in: ArrayLike, v_out: ArrayLike) -> ArrayLike:
    """dV_out/dt = (amp_output − v_out)/τ0; continuous in both arguments."""
    return (amp_output(model, v_in, v_out) - v_out) / model.tau0


def classify_region(model: StModel, v_in: float, v_out: float) -> Region:
    """
    Operating region of a phase-plane point.

    Points exactly on a dashed boundary line belong to the adjacent
    saturation region.
    """
    u = unclipped_output(model, v_in, v_out)
    if u >= model.saturation_m:
        return Region.SATURATION_POS
    if u <= -model.saturation_m:
        return Region.SATURATION_NEG
    return Region.LINEAR


def gamma2(model: StModel, v_in: float) -> float:
    """
    Metastable rest output for a given input: (v_in − (1−k)V_R)/(k − 1/A).

    Raises:
        OutOfRegionError: When the rest point lies outside [γ3, γ1]
    """
    value = (v_in - (1.0 - model.feedback_k) * model.ref_v) / effective_gain(model)
    if abs(value) > model.saturation_m:
        raise OutOfRegionError(
            f"gamma2 rest point {value:g} V outside [-M, M] for v_in={v_in:g} V",
            details={"v_in": v_in, "v_out": value, "saturation_m": model.saturation_m},
        )
    return value


def gamma2_inverse(model: StModel, v_out: float) -> float:
    """Input that makes `v_out` a rest point: (1−k)V_R + v_out·(k − 1/A)."""
    return (1.0 - model.feedback_k) * model.ref_v + v_out * effective_gain(model)


def region_boundaries(model: StModel, v_in: float) -> Tuple[float, float]:
    """
    Output levels of the dashed boundary lines at a given input.

    Returns:
        (v_out_low, v_out_high): below `v_out_low` the amplifier is saturated
        at −M, above `v_out_high` at +M.
    """
    k = model.feedback_k
    base = v_in - (1.0 - k) * model.ref_v
    half = model.saturation_m / model.gain_a
    return (base - half) / k, (base + half) / k


def static_transfer(
    model: StModel, v_in: float, branch: Literal["high", "low"]
) -> float:
    """
    DC output on one branch of the hysteresis loop.

    The high branch holds γ1 until the input exceeds V_H; the low branch
    holds γ3 until the input falls below V_L.
    """
    geometry = derive_geometry(model)
    if branch == "high":
        return geometry.gamma1 if v_in <= geometry.v_h else geometry.gamma3
    if branch == "low":
        return geometry.gamma3 if v_in >= geometry.v_l else geometry.gamma1
    raise ValueError(f"Unknown branch: {branch}")


def phase_map(model: StModel, v_in_grid: np.ndarray, v_out_grid: np.ndarray) -> PhaseMap:
    """
    Derivative field over a (V_in, V_out) grid with the three rest lines.

    Args:
        model: Model parameters
        v_in_grid: Input axis (V)
        v_out_grid: Output axis (V)

    Returns:
        PhaseMap: field[j, i] = derivative_field(v_in[i], v_out[j]) plus
        `gamma1`, `gamma2`, `gamma3` curves clipped to the grid's input range
    """
    v_in_grid = np.asarray(v_in_grid, dtype=float)
    v_out_grid = np.asarray(v_out_grid, dtype=float)
    vi, vo = np.meshgrid(v_in_grid, v_out_grid)
    field = derivative_field(model, vi, vo)

    geometry = derive_geometry(model)
    lo, hi = float(v_in_grid.min()), float(v_in_grid.max())
    n = max(len(v_in_grid), 2)

    curves = {}
    if lo <= geometry.v_h:
        x = np.linspace(lo, min(hi, geometry.v_h), n)
        curves["gamma1"] = np.column_stack([x, np.full(n, geometry.gamma1)])
    if hi >= geometry.v_l:
        x = np.linspace(max(lo, geometry.v_l), hi, n)
        curves["gamma3"] = np.column_stack([x, np.full(n, geometry.gamma3)])
    x0, x1 = max(lo, geometry.v_l), min(hi, geometry.v_h)
    if x1 > x0:
        x = np.linspace(x0, x1, n)
        y = (x - (1.0 - model.feedback_k) * model.ref_v) / effective_gain(model)
        curves["gamma2"] = np.column_stack([x, y])

    logger.info(
        f"Phase map computed: {len(v_in_grid)}x{len(v_out_grid)} grid, "
        f"curves={sorted(curves)}"
    )
    return PhaseMap(v_in=v_in_grid, v_out=v_out_grid, field=field, curves=curves)
