"""Cohort data model: CSV ingestion, inclusion filtering, per-subject
class-stratified splits, and the synthetic heterogeneous cohort generator.

All operations are pure given their inputs and a seed; cohorts are
immutable after construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ConstraintError, ParseError, ValidationError
from .seeding import derive_seed

RESPONSE_MIN = 0
RESPONSE_MAX = 10

# Synthetic generator geometry (see generate_synthetic).
_CENTER_SCALE = 2.0
_WITHIN_CLUSTER_SCALE = 0.25
_RESPONSE_CENTER = 5.0
_RESPONSE_SCALE = 3.0


@dataclass(frozen=True)
class Observation:
    """One survey response row: subject, time coordinate, Likert responses,
    and the binary event-within-next-week label."""

    subject_id: int
    timestamp: float
    responses: tuple[int, ...]
    label: int

    def __post_init__(self):
        if self.subject_id < 0:
            raise ValidationError(f"subject_id must be >= 0, got {self.subject_id}")
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label}")
        for r in self.responses:
            if not RESPONSE_MIN <= r <= RESPONSE_MAX:
                raise ValidationError(
                    f"response {r} outside [{RESPONSE_MIN}, {RESPONSE_MAX}]"
                )


@dataclass(frozen=True)
class Cohort:
    """Ordered observations plus the per-subject index partition."""

    observations: tuple[Observation, ...]
    feature_dim: int
    subject_index: dict[int, tuple[int, ...]] = field(compare=False)

    @classmethod
    def from_observations(cls, observations, feature_dim=None):
        observations = tuple(observations)
        if feature_dim is None:
            if not observations:
                raise ConfigurationError(
                    "feature_dim required for an empty cohort"
                )
            feature_dim = len(observations[0].responses)
        index: dict[int, list[int]] = {}
        for i, obs in enumerate(observations):
            if len(obs.responses) != feature_dim:
                raise ValidationError(
                    f"observation {i} has {len(obs.responses)} responses, "
                    f"expected {feature_dim}"
                )
            index.setdefault(obs.subject_id, []).append(i)
        frozen = {s: tuple(ix) for s, ix in sorted(index.items())}
        return cls(observations=observations, feature_dim=feature_dim, subject_index=frozen)

    @property
    def n_subjects(self):
        return len(self.subject_index)

    @property
    def subject_ids(self):
        return tuple(self.subject_index)

    def arrays(self):
        """(X float64 [n, D], y int8 [n], subjects int64 [n], timestamps float64 [n])."""
        n = len(self.observations)
        X = np.empty((n, self.feature_dim))
        y = np.empty(n, dtype=np.int8)
        subj = np.empty(n, dtype=np.int64)
        t = np.empty(n)
        for i, obs in enumerate(self.observations):
            X[i] = obs.responses
            y[i] = obs.label
            subj[i] = obs.subject_id
            t[i] = obs.timestamp
        return X, y, subj, t

    def class_counts(self, subject_id):
        """(n_positive, n_negative) for one subject."""
        labels = [self.observations[i].label for i in self.subject_index[subject_id]]
        pos = sum(labels)
        return pos, len(labels) - pos

    def view(self, indices):
        return CohortView(cohort=self, indices=tuple(indices))


@dataclass(frozen=True)
class CohortView:
    """A subset of a cohort's observations, addressed by original indices."""

    cohort: Cohort
    indices: tuple[int, ...]

    @property
    def observations(self):
        return tuple(self.cohort.observations[i] for i in self.indices)

    @property
    def feature_dim(self):
        return self.cohort.feature_dim

    def arrays(self):
        X, y, subj, t = self.cohort.arrays()
        ix = np.asarray(self.indices, dtype=np.int64)
        return X[ix], y[ix], subj[ix], t[ix]

    def subject_ids(self):
        return tuple(sorted({self.cohort.observations[i].subject_id for i in self.indices}))


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint train/validation/test index sets over one cohort."""

    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]
    seed: int

    def to_json(self):
        return json.dumps(
            {
                "seed": self.seed,
                "train": list(self.train),
                "validation": list(self.validation),
                "test": list(self.test),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            train=tuple(d["train"]),
            validation=tuple(d["validation"]),
            test=tuple(d["test"]),
            seed=int(d["seed"]),
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Configuration for the synthetic heterogeneous cohort generator."""

    n_subjects: int
    n_clusters: int
    obs_per_subject: tuple[int, int]
    feature_dim: int
    base_rate: float
    latent_dim_true: int = 2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.base_rate < 1.0:
            raise ConfigurationError(f"base_rate must be in (0,1), got {self.base_rate}")
        if self.n_clusters > self.n_subjects:
            raise ConfigurationError(
                f"n_clusters ({self.n_clusters}) exceeds n_subjects ({self.n_subjects})"
            )
        if self.n_clusters < 1 or self.n_subjects < 1:
            raise ConfigurationError("n_subjects and n_clusters must be positive")
        lo, hi = self.obs_per_subject
        if lo < 1 or hi < lo:
            raise ConfigurationError(f"bad obs_per_subject range {self.obs_per_subject}")
        if self.feature_dim < 1 or self.latent_dim_true < 1:
            raise ConfigurationError("feature_dim and latent_dim_true must be positive")


# ---------------------------------------------------------------------------
# CSV interface: header `subject_id,timestamp,r_1,...,r_D,label`.


def _response_columns(header, prefix):
    cols = {}
    for j, name in enumerate(header):
        if name.startswith(prefix):
            suffix = name[len(prefix):]
            if suffix.isdigit():
                cols[int(suffix)] = j
    if not cols:
        raise ParseError(f"no response columns with prefix {prefix!r}", line=1)
    expected = set(range(1, len(cols) + 1))
    if set(cols) != expected:
        raise ParseError(
            f"response columns must be {prefix}1..{prefix}{len(cols)}, got "
            f"{sorted(cols)}", line=1,
        )
    return [cols[i] for i in sorted(cols)]


def ingest_csv(path, schema=None):
    """Parse a cohort CSV. ``schema`` optionally remaps column names:
    {"subject_id": ..., "timestamp": ..., "label": ..., "response_prefix": ...}.
    """
    schema = dict(schema or {})
    sid_col = schema.get("subject_id", "subject_id")
    ts_col = schema.get("timestamp", "timestamp")
    label_col = schema.get("label", "label")
    prefix = schema.get("response_prefix", "r_")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, header row required", line=1) from None
        positions = {name: j for j, name in enumerate(header)}
        for required in (sid_col, ts_col, label_col):
            if required not in positions:
                raise ParseError(f"missing column {required!r}", line=1)
        r_cols = _response_columns(header, prefix)

        observations = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}", line=line_no
                )
            try:
                sid = int(row[positions[sid_col]])
                ts = float(row[positions[ts_col]])
                label = int(row[positions[label_col]])
                responses = tuple(int(row[j]) for j in r_cols)
            except ValueError as exc:
                raise ParseError(str(exc), line=line_no) from None
            try:
                observations.append(
                    Observation(subject_id=sid, timestamp=ts, responses=responses, label=label)
                )
            except ValidationError as exc:
                raise ValidationError(str(exc), line=line_no) from None

    return Cohort.from_observations(observations, feature_dim=len(r_cols))


def emit_csv(cohort, path):
    """Write a cohort in the ingestion format; floats via repr so that
    ingest(emit(cohort)) == cohort."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["subject_id", "timestamp"]
        header += [f"r_{d}" for d in range(1, cohort.feature_dim + 1)]
        header.append("label")
        writer.writerow(header)
        for obs in cohort.observations:
            writer.writerow(
                [obs.subject_id, repr(obs.timestamp), *obs.responses, obs.label]
            )


def write_groups_csv(path, mapping):
    """Emit `subject_id,cluster` rows sorted by subject."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "cluster"])
        for sid in sorted(mapping):
            writer.writerow([sid, mapping[sid]])


def read_groups_csv(path):
    groups = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ParseError("expected header `subject_id,<group>`", line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                groups[int(row[0])] = row[1]
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), line=line_no) from None
    return groups


# ---------------------------------------------------------------------------
# Inclusion rule and splits.


def apply_inclusion_filter(cohort, min_pos=3, min_neg=3):
    """Retain subjects with at least ``min_pos`` positive and ``min_neg``
    negative observations. Idempotent; may return an empty cohort."""
    if min_pos < 1 or min_neg < 1:
        raise ConfigurationError("min_pos and min_neg must be >= 1")
    keep = set()
    for sid in cohort.subject_ids:
        pos, neg = cohort.class_counts(sid)
        if pos >= min_pos and neg >= min_neg:
            keep.add(sid)
    retained = [obs for obs in cohort.observations if obs.subject_id in keep]
    return Cohort.from_observations(retained, feature_dim=cohort.feature_dim)


def _split_one_subject(rng, pos, neg, fractions):
    """Shuffle classes separately, seed one of each per split, fill to the
    per-subject fraction targets; remainder goes to train."""
    pos = list(pos)
    neg = list(neg)
    rng.shuffle(pos)
    rng.shuffle(neg)
    train = [pos[0], neg[0]]
    validation = [pos[1], neg[1]]
    test = [pos[2], neg[2]]
    remaining = pos[3:] + neg[3:]
    rng.shuffle(remaining)
    m = len(pos) + len(neg)
    val_target = int(np.floor(fractions[1] * m))
    test_target = int(np.floor(fractions[2] * m))
    need_val = max(0, val_target - len(validation))
    need_test = max(0, test_target - len(test))
    validation += remaining[:need_val]
    test += remaining[need_val:need_val + need_test]
    train += remaining[need_val + need_test:]
    return train, validation, test


def make_splits(cohort, fractions=(0.5, 0.25, 0.25), n_cuts=1, seed=0):
    """Per-subject class-stratified splits: every subject contributes at
    least one positive and one negative observation to each of the three
    sets; sizes approximate the requested fractions with the remainder
    assigned to train. Deterministic given ``seed``."""
    if len(fractions) != 3 or not np.isclose(sum(fractions), 1.0):
        raise ConfigurationError(f"fractions must be 3 values summing to 1, got {fractions}")
    if n_cuts < 1:
        raise ConfigurationError("n_cuts must be >= 1")
    by_class = {}
    for sid in cohort.subject_ids:
        idx = cohort.subject_index[sid]
        pos = [i for i in idx if cohort.observations[i].label == 1]
        neg = [i for i in idx if cohort.observations[i].label == 0]
        if len(pos) < 3 or len(neg) < 3:
            raise ConstraintError(
                f"subject {sid} has {len(pos)} positives / {len(neg)} negatives; "
                "need at least 3 of each (apply the inclusion filter first)"
            )
        by_class[sid] = (pos, neg)

    cuts = []
    for c in range(n_cuts):
        cut_seed = derive_seed(seed, "split", c)
        rng = np.random.default_rng(cut_seed)
        train, validation, test = [], [], []
        for sid in cohort.subject_ids:
            pos, neg = by_class[sid]
            tr, va, te = _split_one_subject(rng, pos, neg, fractions)
            train += tr
            validation += va
            test += te
        cuts.append(
            SplitAssignment(
                train=tuple(sorted(train)),
                validation=tuple(sorted(validation)),
                test=tuple(sorted(test)),
                seed=cut_seed,
            )
        )
    return cuts


# ---------------------------------------------------------------------------
# Synthetic cohorts.


def _sample_coefficients(rng, spec):
    """Per-subject logit coefficient vectors clustered in a latent space.

    Cluster centers are mutually orthogonal directions whenever they fit in
    the latent dimension (the strongest form of conflicting boundaries),
    random unit directions otherwise. Returns (coef [N, D_x], clusters [N]).
    """
    L = spec.latent_dim_true
    if spec.n_clusters <= L:
        q, _ = np.linalg.qr(rng.normal(size=(L, L)))
        centers = _CENTER_SCALE * q[: spec.n_clusters]
    else:
        v = rng.normal(size=(spec.n_clusters, L))
        centers = _CENTER_SCALE * v / np.linalg.norm(v, axis=1, keepdims=True)
    clusters = np.arange(spec.n_subjects) % spec.n_clusters
    latent = centers[clusters] + _WITHIN_CLUSTER_SCALE * rng.normal(
        size=(spec.n_subjects, L)
    )
    if L <= spec.feature_dim:
        proj, _ = np.linalg.qr(rng.normal(size=(spec.feature_dim, L)))
    else:
        proj = rng.normal(size=(spec.feature_dim, L)) / np.sqrt(L)
    coef = latent @ proj.T
    return coef, clusters


def _calibrate_intercept(logits, base_rate):
    """Bisect the shared intercept so the mean positive probability hits
    base_rate."""
    lo, hi = -30.0, 30.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rate = float(np.mean(1.0 / (1.0 + np.exp(-(logits + mid)))))
        if rate < base_rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_synthetic(spec):
    """Generate a heterogeneous cohort with per-subject linear-logit label
    mechanisms clustered around shared centers.

    Returns (cohort, ground_truth) where ground_truth maps subject_id to
    its true cluster id.
    """
    rng = np.random.default_rng(spec.seed)
    coef, clusters = _sample_coefficients(rng, spec)
    lo, hi = spec.obs_per_subject
    counts = rng.integers(lo, hi + 1, size=spec.n_subjects)

    responses = []
    subjects = []
    times = []
    for sid in range(spec.n_subjects):
        m = counts[sid]
        responses.append(rng.integers(RESPONSE_MIN, RESPONSE_MAX + 1, size=(m, spec.feature_dim)))
        times.append(np.sort(np.round(rng.uniform(0.0, 90.0, size=m), 4)))
        subjects.append(np.full(m, sid))
    R = np.concatenate(responses)
    subj = np.concatenate(subjects)
    t = np.concatenate(times)

    x_tilde = (R - _RESPONSE_CENTER) / _RESPONSE_SCALE
    logits = np.einsum("nd,nd->n", coef[subj], x_tilde)
    intercept = _calibrate_intercept(logits, spec.base_rate)
    probs = 1.0 / (1.0 + np.exp(-(logits + intercept)))
    labels = (rng.uniform(size=len(probs)) < probs).astype(int)

    observations = [
        Observation(
            subject_id=int(subj[i]),
            timestamp=float(t[i]),
            responses=tuple(int(r) for r in R[i]),
            label=int(labels[i]),
        )
        for i in range(len(subj))
    ]
    cohort = Cohort.from_observations(observations, feature_dim=spec.feature_dim)
    ground_truth = {sid: int(clusters[sid]) for sid in range(spec.n_subjects)}
    return cohort, ground_truth
