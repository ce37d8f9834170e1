"""Contrast augmentation by perturbing a fitted mixture and remapping voxels.

One augmentation draw shifts every component's mean and variance by
uniform offsets bounded by the population spreads, then rewrites each
voxel so its standardised offset from every component is preserved:

    v'_k = mu'_k + sigma'_k * (v - mu_k) / sigma_k

The per-component values are blended with the voxel's posterior
responsibilities under the original fit (or assigned hard from the
argmax component), which keeps tissue geometry intact while the
contrast between tissues changes.

Randomness comes from a Philox (counter-based) generator keyed with the
caller's seed; the draw order is fixed as q_mu then q_var for component
0, then component 1, and so on, so a seed identifies one augmentation
everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .gmm import VARIANCE_FLOOR, EmConfig, GmmParams, fit_em, responsibilities
from .population import PopulationStats
from .preprocess import clip_normalize
from .volume import Volume, foreground_mask

# Bound on order-inversion rejection retries before giving up.
_MAX_REDRAWS = 10_000


@dataclass(frozen=True)
class Perturbation:
    """Sampled per-component offsets (q_mu, q_var) for one draw."""

    q_mu: np.ndarray
    q_var: np.ndarray
    seed: int

    def __post_init__(self):
        q_mu = np.asarray(self.q_mu, dtype=np.float64).ravel()
        q_var = np.asarray(self.q_var, dtype=np.float64).ravel()
        if q_mu.size != q_var.size:
            raise InputError("q_mu and q_var must have the same length")
        q_mu.setflags(write=False)
        q_var.setflags(write=False)
        object.__setattr__(self, "q_mu", q_mu)
        object.__setattr__(self, "q_var", q_var)


@dataclass(frozen=True)
class PerturbedGmm:
    """Mixture after applying a perturbation; variances floor-clamped."""

    base: GmmParams
    means: np.ndarray
    variances: np.ndarray
    clamped: tuple[int, ...] = ()

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64).ravel()
        variances = np.asarray(self.variances, dtype=np.float64).ravel()
        if means.size != self.base.k or variances.size != self.base.k:
            raise InputError("perturbed parameter sizes disagree with base k")
        if np.any(variances < VARIANCE_FLOOR):
            raise InputError(f"perturbed variances must be >= {VARIANCE_FLOOR}")
        means.setflags(write=False)
        variances.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)


def _draw_offsets(rng: np.random.Generator, stats: PopulationStats):
    """One uniform draw per bound, component-major order."""
    q_mu = np.empty(stats.k)
    q_var = np.empty(stats.k)
    for i in range(stats.k):
        q_mu[i] = (2.0 * rng.random() - 1.0) * stats.mu_std[i]
        q_var[i] = (2.0 * rng.random() - 1.0) * stats.var_std[i]
    return q_mu, q_var


def sample_perturbation(stats: PopulationStats, seed: int) -> Perturbation:
    """Draw q_mu[i] ~ U(-mu_std[i], +mu_std[i]) and likewise q_var.

    Philox keyed with ``seed``; the same seed always reproduces the
    same draw, on any platform.
    """
    rng = np.random.Generator(np.random.Philox(int(seed)))
    q_mu, q_var = _draw_offsets(rng, stats)
    return Perturbation(q_mu=q_mu, q_var=q_var, seed=int(seed))


def apply_perturbation(params: GmmParams, pert: Perturbation) -> PerturbedGmm:
    """Shift means and variances; clamp negative variances to the floor.

    Clamped component indices are reported on the result. Perturbed
    means may leave ascending order; unrealistic contrasts are allowed
    by design.
    """
    if pert.q_mu.size != params.k:
        raise InputError(f"perturbation has {pert.q_mu.size} components, fit has {params.k}")
    means = params.means + pert.q_mu
    raw_vars = params.variances + pert.q_var
    clamped = tuple(int(i) for i in np.flatnonzero(raw_vars < VARIANCE_FLOOR))
    return PerturbedGmm(
        base=params,
        means=means,
        variances=np.maximum(raw_vars, VARIANCE_FLOOR),
        clamped=clamped,
    )


def component_values(values, params: GmmParams, pert: PerturbedGmm) -> np.ndarray:
    """(n, k) array of v'_k = mu'_k + sigma'_k * (v - mu_k) / sigma_k."""
    v = np.asarray(values, dtype=np.float64).ravel()
    sigma = np.sqrt(params.variances)
    sigma_new = np.sqrt(pert.variances)
    distance = (v[:, None] - params.means[None, :]) / sigma[None, :]
    return pert.means[None, :] + distance * sigma_new[None, :]


def remap(
    vol: Volume,
    mask: np.ndarray,
    params: GmmParams,
    pert: PerturbedGmm,
    hard_assign: bool = False,
    clip: bool = True,
) -> Volume:
    """Rewrite masked voxels under the perturbed mixture.

    Per-component values are mixed with the posterior responsibilities
    of the original fit; ``hard_assign`` instead takes the single
    argmax-responsibility component. Output is clipped to [0, 1] unless
    ``clip`` is disabled. Voxels outside the mask are untouched.
    """
    mask = np.asarray(mask, dtype=bool).ravel()
    if mask.size != vol.n_voxels:
        raise InputError(f"mask length {mask.size} != voxel count {vol.n_voxels}")
    v = vol.data[mask]
    gamma = responsibilities(params, v)
    per_component = component_values(v, params, pert)
    if hard_assign:
        remapped = per_component[np.arange(v.size), np.argmax(gamma, axis=1)]
    else:
        remapped = (gamma * per_component).sum(axis=1)
    if clip:
        remapped = np.clip(remapped, 0.0, 1.0)
    out = vol.data.copy()
    out[mask] = remapped
    return Volume(vol.dims, vol.spacing, out)


def augment_volume(
    vol: Volume,
    stats: PopulationStats,
    seed: int,
    cfg: EmConfig | None = None,
    *,
    hard_assign: bool = False,
    reject_order_inversion: bool = False,
    clip: bool = True,
) -> tuple[Volume, GmmParams, Perturbation]:
    """Full pipeline: mask, normalize, fit, perturb, remap.

    The volume must be skull-stripped (foreground derivable from
    positive intensities). Normalization percentiles follow the ones
    recorded in ``stats`` so augmentation matches the corpus
    preprocessing. Returns the remapped volume plus the fit and the
    perturbation actually applied, for provenance.

    With ``reject_order_inversion`` draws that invert the order of the
    perturbed means are discarded and redrawn from the same stream.
    """
    mask = foreground_mask(vol)
    normalized, _ = clip_normalize(vol, mask, stats.clip_lo_pct, stats.clip_hi_pct)
    params = fit_em(normalized.data[mask], stats.k, cfg)

    rng = np.random.Generator(np.random.Philox(int(seed)))
    for _ in range(_MAX_REDRAWS):
        q_mu, q_var = _draw_offsets(rng, stats)
        if not reject_order_inversion or np.all(np.diff(params.means + q_mu) >= 0):
            break
    else:
        raise NumericalError(
            f"no order-preserving perturbation found in {_MAX_REDRAWS} draws"
        )
    pert = Perturbation(q_mu=q_mu, q_var=q_var, seed=int(seed))

    perturbed = apply_perturbation(params, pert)
    out = remap(normalized, mask, params, perturbed, hard_assign=hard_assign, clip=clip)
    return out, params, pert


def provenance_dict(
    seed: int, params: GmmParams, pert: Perturbation, perturbed: PerturbedGmm
) -> dict:
    """Sidecar payload describing one augmentation draw."""
    return {
        "seed": int(seed),
        "fit": params.to_json_dict(),
        "perturbation": {
            "q_mu": pert.q_mu.tolist(),
            "q_var": pert.q_var.tolist(),
        },
        "clamped_variances": list(perturbed.clamped),
    }
