"""Cohort ingestion, validation, eligibility filtering and feature extraction.

Day offsets are expressed relative to each participant's first reported
infection; later infections are not represented.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .artifacts import fmt, write_csv
from .dataset import Dataset
from .errors import ConsistencyError, DuplicateIdError, SchemaError
from .rules import PcsiRules

logger = logging.getLogger(__name__)

DEFAULT_SYMPTOMS = (
    "headache",
    "dizziness",
    "chest_pain",
    "lower_back_pain",
    "nausea",
    "muscle_pain",
    "difficulty_breathing",
    "feeling_warm_cold",
    "sore_throat",
    "loss_of_smell_taste",
)
GENDERS = ("female", "male")
VARIANTS = ("original", "alpha_delta", "omicron", "unknown")
VACCINATION_STATUSES = ("none", "partial", "full")
DEFAULT_INCOME_LEVELS = ("low", "middle", "high")

STATIC_HEADER = ("id", "gender", "age", "income", "smoker", "general_health", "chronic_disease", "variant")
RECORDS_HEADER = ("id", "day_offset", "symptom", "score")
VACCINATION_HEADER = ("id", "status", "time_to_infection_days")

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


@dataclass(frozen=True)
class SchemaConfig:
    symptom_names: tuple[str, ...] = DEFAULT_SYMPTOMS
    income_levels: tuple[str, ...] = DEFAULT_INCOME_LEVELS


@dataclass(frozen=True)
class Participant:
    id: str
    gender: str
    age: float
    income: str
    smoker: bool
    general_health: int
    chronic_disease: bool
    variant: str


@dataclass(frozen=True)
class SymptomRecord:
    participant_id: str
    day_offset: int
    scores: dict[str, float]


@dataclass(frozen=True)
class VaccinationInfo:
    participant_id: str
    status: str
    time_to_infection_days: int | None = None


@dataclass(frozen=True)
class Cohort:
    """Validated participants with their questionnaires and vaccination data.

    ``records`` maps a participant id to its questionnaires sorted by day
    offset. Participant order is preserved from the input.
    """

    participants: dict[str, Participant]
    records: dict[str, tuple[SymptomRecord, ...]]
    vaccinations: dict[str, VaccinationInfo]
    symptom_names: tuple[str, ...]
    income_levels: tuple[str, ...] = DEFAULT_INCOME_LEVELS

    def __len__(self):
        return len(self.participants)

    def records_for(self, pid: str) -> tuple[SymptomRecord, ...]:
        return self.records.get(pid, ())

    def subset(self, ids) -> "Cohort":
        wanted = set(ids)
        keep = [pid for pid in self.participants if pid in wanted]
        return Cohort(
            participants={pid: self.participants[pid] for pid in keep},
            records={pid: self.records.get(pid, ()) for pid in keep},
            vaccinations={pid: self.vaccinations[pid] for pid in keep if pid in self.vaccinations},
            symptom_names=self.symptom_names,
            income_levels=self.income_levels,
        )


@dataclass
class IngestReport:
    drops: Counter = field(default_factory=Counter)
    duplicate_cells: int = 0
    n_participants: int = 0
    n_records: int = 0

    @property
    def out_of_range(self) -> int:
        return self.drops["out_of_range"]

    def to_dict(self) -> dict:
        return {
            "drops": dict(sorted(self.drops.items())),
            "duplicate_cells": self.duplicate_cells,
            "n_participants": self.n_participants,
            "n_records": self.n_records,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class ExclusionReport:
    n_input: int = 0
    n_retained: int = 0
    missing_baseline: int = 0
    missing_post_window: int = 0
    excluded_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _read_csv(path, header) -> list[dict[str, str]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        found = reader.fieldnames or []
        missing = [col for col in header if col not in found]
        if missing:
            raise SchemaError(f"{path.name}: missing columns {missing}", missing)
        return list(reader)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    value = float(text)
    if not math.isfinite(value) or value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def load_cohort(static_path, records_path, vaccination_path, schema: SchemaConfig | None = None):
    """Read the three cohort CSVs and return ``(Cohort, IngestReport)``.

    Invalid rows are dropped and counted by reason. Participants without a
    vaccination row are dropped together with their records.
    """
    schema = schema or SchemaConfig()
    report = IngestReport()
    static_rows = _read_csv(static_path, STATIC_HEADER)
    record_rows = _read_csv(records_path, RECORDS_HEADER)
    vacc_rows = _read_csv(vaccination_path, VACCINATION_HEADER)

    participants: dict[str, Participant] = {}
    for row in static_rows:
        pid = row["id"].strip()
        if pid in participants:
            raise DuplicateIdError(f"duplicate participant id {pid!r}")
        try:
            age = float(row["age"])
            health = _parse_int(row["general_health"])
            smoker = _parse_bool(row["smoker"])
            chronic = _parse_bool(row["chronic_disease"])
        except ValueError:
            report.drops["unparseable"] += 1
            continue
        gender = row["gender"].strip().lower()
        income = row["income"].strip().lower()
        variant = row["variant"].strip().lower()
        if (
            not pid
            or gender not in GENDERS
            or income not in schema.income_levels
            or variant not in VARIANTS
            or not 18 <= age <= 120
            or not 1 <= health <= 5
        ):
            report.drops["invalid_static"] += 1
            continue
        participants[pid] = Participant(pid, gender, age, income, smoker, health, chronic, variant)

    vaccinations: dict[str, VaccinationInfo] = {}
    for row in vacc_rows:
        pid = row["id"].strip()
        if pid in vaccinations:
            raise DuplicateIdError(f"duplicate vaccination row for participant {pid!r}")
        status = row["status"].strip().lower()
        tti_text = (row["time_to_infection_days"] or "").strip()
        try:
            tti = _parse_int(tti_text) if tti_text else None
        except ValueError:
            report.drops["unparseable"] += 1
            continue
        if status not in VACCINATION_STATUSES or (tti is None) != (status == "none"):
            report.drops["invalid_vaccination"] += 1
            continue
        if pid not in participants:
            report.drops["unknown_participant"] += 1
            continue
        vaccinations[pid] = VaccinationInfo(pid, status, tti)

    for pid in [pid for pid in participants if pid not in vaccinations]:
        report.drops["missing_vaccination"] += 1
        del participants[pid]

    known_symptoms = set(schema.symptom_names)
    cells: dict[tuple[str, int], dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for row in record_rows:
        pid = row["id"].strip()
        score_text = (row["score"] or "").strip()
        if not score_text:
            continue
        try:
            day = _parse_int(row["day_offset"])
            score = float(score_text)
        except ValueError:
            report.drops["unparseable"] += 1
            continue
        if not math.isfinite(score):
            report.drops["unparseable"] += 1
            continue
        if not 1.0 <= score <= 5.0:
            report.drops["out_of_range"] += 1
            continue
        symptom = row["symptom"].strip()
        if symptom not in known_symptoms:
            report.drops["unknown_symptom"] += 1
            continue
        if pid not in participants:
            report.drops["unknown_participant"] += 1
            continue
        cells[(pid, day)][symptom].append(score)

    by_participant: dict[str, list[SymptomRecord]] = defaultdict(list)
    for (pid, day), scores in cells.items():
        merged = {}
        for symptom in schema.symptom_names:
            values = scores.get(symptom)
            if not values:
                continue
            if len(values) > 1:
                report.duplicate_cells += len(values) - 1
            merged[symptom] = math.fsum(values) / len(values)
        by_participant[pid].append(SymptomRecord(pid, day, merged))

    records = {
        pid: tuple(sorted(by_participant.get(pid, ()), key=lambda r: r.day_offset))
        for pid in participants
    }
    if report.duplicate_cells:
        logger.warning("averaged %d duplicate questionnaire cells", report.duplicate_cells)
    report.n_participants = len(participants)
    report.n_records = sum(len(r) for r in records.values())
    cohort = Cohort(
        participants=participants,
        records=records,
        vaccinations=vaccinations,
        symptom_names=tuple(schema.symptom_names),
        income_levels=tuple(schema.income_levels),
    )
    return cohort, report


def save_cohort(cohort: Cohort, directory) -> dict[str, Path]:
    """Write ``static.csv``, ``records.csv`` and ``vaccination.csv`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "static": directory / "static.csv",
        "records": directory / "records.csv",
        "vaccination": directory / "vaccination.csv",
    }
    write_csv(
        paths["static"],
        STATIC_HEADER,
        (
            [p.id, p.gender, fmt(p.age), p.income, fmt(p.smoker), p.general_health,
             fmt(p.chronic_disease), p.variant]
            for p in cohort.participants.values()
        ),
    )
    write_csv(
        paths["records"],
        RECORDS_HEADER,
        (
            [rec.participant_id, rec.day_offset, symptom, fmt(score)]
            for pid in cohort.participants
            for rec in cohort.records_for(pid)
            for symptom, score in rec.scores.items()
        ),
    )
    write_csv(
        paths["vaccination"],
        VACCINATION_HEADER,
        (
            [v.participant_id, v.status, "" if v.time_to_infection_days is None else v.time_to_infection_days]
            for v in (cohort.vaccinations[pid] for pid in cohort.participants)
        ),
    )
    return paths


def filter_eligible(cohort: Cohort, rules: PcsiRules | None = None):
    """Keep participants with a baseline questionnaire and a post-window questionnaire.

    Returns ``(Cohort, ExclusionReport)``. A participant missing both is
    counted under both reasons.
    """
    rules = rules or PcsiRules()
    report = ExclusionReport(n_input=len(cohort))
    keep = []
    for pid in cohort.participants:
        recs = cohort.records_for(pid)
        has_base = any(rules.in_baseline(r.day_offset) and r.scores for r in recs)
        has_post = any(rules.in_window(r.day_offset) and r.scores for r in recs)
        if has_base and has_post:
            keep.append(pid)
            continue
        report.excluded_ids.append(pid)
        report.missing_baseline += not has_base
        report.missing_post_window += not has_post
    report.n_retained = len(keep)
    return cohort.subset(keep), report


def _baseline_means(records, symptom_names, rules) -> dict[str, float]:
    sums: dict[str, list[float]] = defaultdict(list)
    for rec in records:
        if not rules.in_baseline(rec.day_offset):
            continue
        for symptom, score in rec.scores.items():
            sums[symptom].append(score)
    return {s: math.fsum(v) / len(v) for s, v in sums.items() if v}


def extract_features(cohort: Cohort, rules: PcsiRules | None = None):
    """Encode static, baseline-symptom and vaccination features per participant.

    Only questionnaires inside the baseline window are read. Returns
    ``(x, feature_names, feature_groups)`` with rows in participant order.
    """
    rules = rules or PcsiRules()
    names: list[str] = []
    groups: dict[str, str] = {}

    def add(name, group):
        names.append(name)
        groups[name] = group

    for g in GENDERS:
        add(f"gender_{g}", "static")
    add("age", "static")
    for level in cohort.income_levels:
        add(f"income_{level}", "static")
    add("smoker", "static")
    add("general_health", "static")
    add("chronic_disease", "static")
    for v in VARIANTS:
        add(f"variant_{v}", "static")
    for s in cohort.symptom_names:
        add(f"symptom_{s}", "symptoms")
    add("vaccine_partial", "vaccination")
    add("vaccine_full", "vaccination")
    add("no_vaccine", "vaccination")
    add("vaccine_tti", "vaccination")

    rows = []
    for pid, part in cohort.participants.items():
        row = [float(part.gender == g) for g in GENDERS]
        row.append(float(part.age))
        row.extend(float(part.income == level) for level in cohort.income_levels)
        row.append(float(part.smoker))
        row.append(float(part.general_health))
        row.append(float(part.chronic_disease))
        row.extend(float(part.variant == v) for v in VARIANTS)
        base = _baseline_means(cohort.records_for(pid), cohort.symptom_names, rules)
        # never-reported symptoms read as "not at all"
        row.extend(base.get(s, 1.0) for s in cohort.symptom_names)
        vacc = cohort.vaccinations.get(pid)
        if vacc is None:
            raise ConsistencyError(f"participant {pid!r} has no vaccination information")
        row.append(float(vacc.status == "partial"))
        row.append(float(vacc.status == "full"))
        row.append(float(vacc.status == "none"))
        row.append(float(vacc.time_to_infection_days or 0))
        rows.append(row)
    x = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return x, tuple(names), groups


def build_dataset(cohort: Cohort, pcsi_results, rules: PcsiRules | None = None) -> Dataset:
    """One row per PCSI result with pre-infection features and PCSI as target.

    ``pcsi_results`` maps participant id to an object with a ``pcsi``
    attribute. Rows follow the order of ``pcsi_results``.
    """
    unknown = [pid for pid in pcsi_results if pid not in cohort.participants]
    if unknown:
        raise ConsistencyError(f"PCSI results for unknown participants: {unknown[:5]}")
    sub = cohort.subset(list(pcsi_results))
    x, names, groups = extract_features(sub, rules)
    order = {pid: i for i, pid in enumerate(sub.participants)}
    ids = tuple(pcsi_results)
    x = x[[order[pid] for pid in ids]] if ids else x
    y = np.array([pcsi_results[pid].pcsi for pid in ids], dtype=np.float64)
    constant = tuple(
        name for j, name in enumerate(names) if x.shape[0] and np.all(x[:, j] == x[0, j])
    )
    return Dataset(x=x, y=y, feature_names=names, feature_groups=groups, ids=ids,
                   constant_features=constant)
