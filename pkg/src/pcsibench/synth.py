"""Synthetic cohorts with a planted, known effect structure.

The generator draws static attributes and pre-infection questionnaires,
encodes them with the same feature extraction the regression pipeline
uses, and maps a planted linear score onto a latent symptom intensity:

    latent = clamp(1 + softplus(intercept + w . x + eps), 1, 5)

Post-window Likert scores are ``round_half_up(clamp(b_s + l_s * (latent - 1), 1, 5))``
where ``b_s`` is the participant's baseline mean for symptom ``s`` and
``l_s`` its loading. All randomness comes from counter-based SplitMix64
streams, so a (config, seed) pair always yields the same cohort.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cohort import (
    DEFAULT_INCOME_LEVELS,
    DEFAULT_SYMPTOMS,
    GENDERS,
    VARIANTS,
    Cohort,
    Participant,
    SymptomRecord,
    VaccinationInfo,
    extract_features,
)
from .errors import ConfigurationError, FeasibilityError
from .rng import CounterStream
from .rules import PcsiRules

DEFAULT_PLANTED_WEIGHTS = {
    "symptom_loss_of_smell_taste": 3.2,
    "symptom_headache": 2.8,
    "symptom_muscle_pain": 2.4,
    "chronic_disease": 2.0,
    "vaccine_tti": -0.008,
}
DEFAULT_INTERCEPT = -13.0
DEFAULT_LOADING = 1.0
BASELINE_SPREAD = 2.0

_INCOME_PROBS = (0.3, 0.45, 0.25)
_HEALTH_PROBS = (0.1, 0.3, 0.35, 0.2, 0.05)
_VARIANT_PROBS = (0.25, 0.3, 0.4, 0.05)
_VACCINE_PROBS = (0.25, 0.15, 0.6)
_BASELINE_SPAN = 90
_SKEW_WEIGHT_BOUND = 8.0
_SKEW_CALIBRATION_N = 4000


@dataclass(frozen=True)
class SynthConfig:
    n_participants: int = 1000
    seed: int = 7
    female_fraction: float = 0.64
    planted_weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PLANTED_WEIGHTS))
    intercept: float = DEFAULT_INTERCEPT
    noise_sd: float = 0.5
    missing_rate: float = 0.0
    questionnaires_per_window: int = 3
    symptom_noise_sd: float = 0.6
    symptom_loadings: dict[str, float] = field(default_factory=dict)
    symptom_names: tuple[str, ...] = DEFAULT_SYMPTOMS
    income_levels: tuple[str, ...] = DEFAULT_INCOME_LEVELS

    def __post_init__(self):
        if self.n_participants < 1:
            raise ConfigurationError(f"n_participants must be >= 1, got {self.n_participants}")
        for name in ("female_fraction", "missing_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")
        if self.noise_sd < 0 or self.symptom_noise_sd < 0:
            raise ConfigurationError("noise standard deviations must be non-negative")
        if not 1 <= self.questionnaires_per_window <= 30:
            raise ConfigurationError("questionnaires_per_window must lie in [1, 30]")
        object.__setattr__(self, "symptom_names", tuple(self.symptom_names))
        object.__setattr__(self, "income_levels", tuple(self.income_levels))

    def loading(self, symptom: str) -> float:
        return float(self.symptom_loadings.get(symptom, DEFAULT_LOADING))


@dataclass(frozen=True)
class GroundTruth:
    latent_intensity: dict[str, float]
    active_features: tuple[str, ...]
    planted_weights: dict[str, float]
    intercept: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "active_features": list(self.active_features),
                "planted_weights": dict(sorted(self.planted_weights.items())),
                "intercept": self.intercept,
                "latent_intensity": self.latent_intensity,
            },
            indent=2,
        )


def _round_half_up(v: np.ndarray) -> np.ndarray:
    return np.floor(v + 0.5)


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


@dataclass
class _Draws:
    ids: list[str]
    participants: dict[str, Participant]
    vaccinations: dict[str, VaccinationInfo]
    baseline_records: dict[str, list[SymptomRecord]]
    x: np.ndarray
    names: tuple[str, ...]
    eps: np.ndarray
    post_days: np.ndarray
    post_missing: np.ndarray


def _draw(config: SynthConfig) -> _Draws:
    n = config.n_participants
    q = config.questionnaires_per_window
    symptoms = config.symptom_names
    n_sym = len(symptoms)
    rules = PcsiRules()
    ids = [f"P{i + 1:05d}" for i in range(n)]

    static = CounterStream(config.seed, "static")
    female = static.uniform(n) < config.female_fraction
    age = static.integers(n, 18, 85)
    income_probs = _INCOME_PROBS if len(config.income_levels) == len(_INCOME_PROBS) else [1.0] * len(config.income_levels)
    income = static.choice(n, income_probs)
    smoker = static.uniform(n) < 0.18
    health = static.choice(n, _HEALTH_PROBS) + 1
    chronic = static.uniform(n) < 0.3
    variant = static.choice(n, _VARIANT_PROBS)
    vacc = static.choice(n, _VACCINE_PROBS)
    tti = static.integers(n, 14, 400)

    participants = {}
    vaccinations = {}
    for i, pid in enumerate(ids):
        participants[pid] = Participant(
            id=pid,
            gender=GENDERS[0] if female[i] else GENDERS[1],
            age=float(age[i]),
            income=config.income_levels[income[i]],
            smoker=bool(smoker[i]),
            general_health=int(health[i]),
            chronic_disease=bool(chronic[i]),
            variant=VARIANTS[variant[i]],
        )
        status = ("none", "partial", "full")[vacc[i]]
        vaccinations[pid] = VaccinationInfo(pid, status, None if status == "none" else int(tti[i]))

    base = CounterStream(config.seed, "baseline")
    # per participant/symptom propensity, skewed towards "not at all"
    propensity = 1.0 + BASELINE_SPREAD * base.uniform(n * n_sym).reshape(n, n_sym) ** 3
    slot = base.uniform(n * q).reshape(n, q)
    base_days = rules.baseline_cutoff - (np.arange(q) * _BASELINE_SPAN + np.floor(slot * _BASELINE_SPAN)).astype(np.int64)
    noise = base.normal(n * q * n_sym).reshape(n, q, n_sym)
    scores = _round_half_up(np.clip(propensity[:, None, :] + config.symptom_noise_sd * noise, 1.0, 5.0))
    missing = CounterStream(config.seed, "missing")
    base_missing = missing.uniform(n * q * n_sym).reshape(n, q, n_sym) < config.missing_rate
    post_missing = missing.uniform(n * q * n_sym).reshape(n, q, n_sym) < config.missing_rate

    baseline_records = {}
    for i, pid in enumerate(ids):
        recs = []
        for k in sorted(range(q), key=lambda k: base_days[i, k]):
            row = {symptoms[s]: float(scores[i, k, s]) for s in range(n_sym) if not base_missing[i, k, s]}
            if row:
                recs.append(SymptomRecord(pid, int(base_days[i, k]), row))
        baseline_records[pid] = recs

    lo, hi = rules.window
    width = (hi - lo + 1) / q
    post_slot = CounterStream(config.seed, "post").uniform(n * q).reshape(n, q)
    post_days = (lo + np.floor((np.arange(q) + post_slot) * width)).astype(np.int64)

    eps = CounterStream(config.seed, "latent-noise").normal(n)

    tmp = Cohort(
        participants=participants,
        records={pid: tuple(r) for pid, r in baseline_records.items()},
        vaccinations=vaccinations,
        symptom_names=symptoms,
        income_levels=config.income_levels,
    )
    x, names, _ = extract_features(tmp, rules)
    return _Draws(ids, participants, vaccinations, baseline_records, x, names, eps, post_days, post_missing)


def _latent(draws: _Draws, config: SynthConfig) -> np.ndarray:
    index = {name: j for j, name in enumerate(draws.names)}
    unknown = sorted(set(config.planted_weights) - set(index))
    if unknown:
        raise ConfigurationError(f"planted weights reference unknown features: {unknown}")
    w = np.zeros(len(draws.names))
    for name, value in config.planted_weights.items():
        w[index[name]] = value
    score = config.intercept + draws.x @ w + config.noise_sd * draws.eps
    return np.clip(1.0 + _softplus(score), 1.0, 5.0)


def _assemble(draws: _Draws, config: SynthConfig, latent: np.ndarray) -> Cohort:
    symptoms = config.symptom_names
    index = {name: j for j, name in enumerate(draws.names)}
    base_means = draws.x[:, [index[f"symptom_{s}"] for s in symptoms]]
    loadings = np.array([config.loading(s) for s in symptoms])
    post = _round_half_up(np.clip(base_means + loadings[None, :] * (latent[:, None] - 1.0), 1.0, 5.0))
    q = config.questionnaires_per_window
    records = {}
    for i, pid in enumerate(draws.ids):
        recs = list(draws.baseline_records[pid])
        for k in range(q):
            row = {symptoms[s]: float(post[i, s]) for s in range(len(symptoms)) if not draws.post_missing[i, k, s]}
            if row:
                recs.append(SymptomRecord(pid, int(draws.post_days[i, k]), row))
        records[pid] = tuple(sorted(recs, key=lambda r: r.day_offset))
    return Cohort(
        participants=draws.participants,
        records=records,
        vaccinations=draws.vaccinations,
        symptom_names=symptoms,
        income_levels=config.income_levels,
    )


def _ground_truth(draws: _Draws, config: SynthConfig, latent: np.ndarray) -> GroundTruth:
    active = sorted(
        (name for name, w in config.planted_weights.items() if w != 0),
        key=lambda name: (-abs(config.planted_weights[name]), name),
    )
    return GroundTruth(
        latent_intensity={pid: float(v) for pid, v in zip(draws.ids, latent)},
        active_features=tuple(active),
        planted_weights=dict(config.planted_weights),
        intercept=config.intercept,
    )


def generate(config: SynthConfig) -> tuple[Cohort, GroundTruth]:
    """Generate a cohort and its ground truth; deterministic in ``config``."""
    draws = _draw(config)
    latent = _latent(draws, config)
    return _assemble(draws, config, latent), _ground_truth(draws, config, latent)


def _female_share_high(cohort: Cohort, threshold: float = 3.0) -> float:
    from .cohort import filter_eligible
    from .pcsi import compute_all

    eligible, _ = filter_eligible(cohort)
    results = compute_all(eligible)
    high = [pid for pid, r in results.items() if r.pcsi >= threshold]
    if not high:
        return math.nan
    return sum(cohort.participants[pid].gender == "female" for pid in high) / len(high)


def plant_gender_skew(config: SynthConfig, high_intensity_female_share: float) -> SynthConfig:
    """Return a config whose ``gender_female`` weight yields the requested share.

    The share is the fraction of women among participants with PCSI >= 3.
    The added weight is found by bisection on a calibration cohort drawn
    with the config's own seed (at least 4000 participants).
    """
    share = high_intensity_female_share
    if not 0.0 <= share <= 1.0:
        raise ConfigurationError(f"share must lie in [0, 1], got {share}")
    weights = dict(config.planted_weights)
    base_weight = weights.get("gender_female", 0.0)
    if math.isclose(share, config.female_fraction, rel_tol=0.0, abs_tol=1e-12):
        return replace(config, planted_weights=weights)

    calib = replace(config, n_participants=max(config.n_participants, _SKEW_CALIBRATION_N))
    draws = _draw(calib)

    def share_at(added: float) -> float:
        trial = replace(calib, planted_weights={**weights, "gender_female": base_weight + added})
        return _female_share_high(_assemble(draws, trial, _latent(draws, trial)))

    lo, hi = -_SKEW_WEIGHT_BOUND, _SKEW_WEIGHT_BOUND
    s_lo, s_hi = share_at(lo), share_at(hi)
    if math.isnan(s_lo) or math.isnan(s_hi) or not s_lo <= share <= s_hi:
        raise FeasibilityError(
            f"female share {share:.3f} among high-intensity participants is not reachable with "
            f"female_fraction={config.female_fraction}; achievable range [{s_lo:.3f}, {s_hi:.3f}] "
            f"at saturated gender weight +/-{_SKEW_WEIGHT_BOUND}"
        )
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        s_mid = share_at(mid)
        if math.isnan(s_mid):
            break
        if s_mid < share:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-4:
            break
    added = 0.5 * (lo + hi)
    return replace(config, planted_weights={**weights, "gender_female": base_weight + added})
