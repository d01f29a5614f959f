"""Append-only tuning-budget ledger with evidence-gated search-space expansion.

The guard enforces process, not hyperparameter semantics: a fixed number of
trial draws per model against a committed search space, and a space expansion
(applying to all models, with a fresh budget) only when cited trials failed
to train. The ledger is a line-delimited JSON log; audits recompute every
invariant from the raw log so that hand edits cannot hide.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import InputError, ValidationError

LEDGER_FORMAT = "budget-ledger-v1"

FRESH_BUDGET_NOTE = (
    "policy: each search-space version carries a fresh per-model budget; "
    "trials at older versions stay counted against their own version"
)


class EmptySpace(ValidationError):
    pass


class InvalidBudget(ValidationError):
    pass


class SpaceFormatError(ValidationError):
    pass


class UnknownModel(ValidationError):
    pass


class BudgetExhausted(ValidationError):
    pass


class UnknownTrial(ValidationError):
    pass


class AlreadyReported(ValidationError):
    pass


class InsufficientEvidence(ValidationError):
    pass


class LedgerFormatError(InputError):
    pass


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


# -- search-space text blobs ----------------------------------------------


def parse_space(text: str) -> list[tuple[str, str, object]]:
    """Validate a search-space blob: one `name: spec` line per dimension.

    spec is either choices `a | b | c` or a numeric range `lo .. hi`.
    Returns (name, kind, payload) tuples; kind is "choices" or "range".
    """
    dims: list[tuple[str, str, object]] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise SpaceFormatError(f"space line {lineno}: expected `name: spec`")
        name, spec = (part.strip() for part in line.split(":", 1))
        if not name or not spec:
            raise SpaceFormatError(f"space line {lineno}: empty name or spec")
        if name in seen:
            raise SpaceFormatError(f"space line {lineno}: duplicate dimension {name!r}")
        seen.add(name)
        if ".." in spec:
            lo_raw, hi_raw = (part.strip() for part in spec.split("..", 1))
            try:
                lo, hi = float(lo_raw), float(hi_raw)
            except ValueError:
                raise SpaceFormatError(f"space line {lineno}: bad range bounds") from None
            if not lo <= hi:
                raise SpaceFormatError(f"space line {lineno}: range is inverted")
            dims.append((name, "range", (lo, hi)))
        else:
            choices = tuple(part.strip() for part in spec.split("|") if part.strip())
            if not choices:
                raise SpaceFormatError(f"space line {lineno}: no choices")
            dims.append((name, "choices", choices))
    if not dims:
        raise EmptySpace("search space has no dimensions")
    return dims


def sample_assignment(space_text: str, space_version: int, seed: int) -> dict[str, str]:
    """Deterministic assignment from (space_version, seed); platform-stable."""
    assignment: dict[str, str] = {}
    for name, kind, payload in parse_space(space_text):
        digest = hashlib.sha256(
            f"{space_version}\x00{seed}\x00{name}\x00{kind}\x00{payload!r}".encode("utf-8")
        ).digest()
        unit = int.from_bytes(digest[:8], "little") / 2**64
        if kind == "choices":
            choices = payload
            assignment[name] = choices[min(int(unit * len(choices)), len(choices) - 1)]
        else:
            lo, hi = payload
            assignment[name] = repr(lo + unit * (hi - lo))
    return assignment


# -- ledger state and persistence ------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    trial_id: str
    model: str
    space_version: int
    seed: int
    assignment: dict[str, str]
    outcome: str = "pending"  # pending | trained | failed_to_train
    accuracy: float | None = None
    reason: str | None = None


@dataclass(frozen=True)
class Expansion:
    space_version: int
    evidence: tuple[str, ...]
    timestamp: str


@dataclass
class _LedgerState:
    models: tuple[str, ...] = ()
    budget: int = 0
    space_versions: list[str] = field(default_factory=list)
    trials: dict[str, TrialRecord] = field(default_factory=dict)
    expansions: list[Expansion] = field(default_factory=list)

    @property
    def current_version(self) -> int:
        return len(self.space_versions)

    def trial_count(self, model: str, version: int) -> int:
        return sum(
            1
            for t in self.trials.values()
            if t.model == model and t.space_version == version
        )


class BudgetLedger:
    """File-backed ledger; every mutation appends exactly one log line."""

    def __init__(self, path: Path | str, state: _LedgerState):
        self.path = Path(path)
        self._state = state

    # -- constructors ----------------------------------------------------

    @classmethod
    def create(
        cls,
        path: Path | str,
        models: Sequence[str],
        space_text: str,
        budget: int,
        clock: Callable[[], str] = _utc_now,
    ) -> "BudgetLedger":
        models = tuple(models)
        if not models or len(set(models)) != len(models):
            raise ValidationError("models must be a non-empty list of unique names")
        if budget < 1:
            raise InvalidBudget(f"budget must be >= 1, got {budget}")
        parse_space(space_text)
        path = Path(path)
        if path.exists():
            raise ValidationError(f"ledger already exists: {path}")
        ledger = cls(path, _LedgerState(models=models, budget=budget, space_versions=[space_text]))
        ledger._append(
            {
                "event": "init",
                "format": LEDGER_FORMAT,
                "models": list(models),
                "budget": budget,
                "space": space_text,
                "ts": clock(),
            }
        )
        return ledger

    @classmethod
    def load(cls, path: Path | str) -> "BudgetLedger":
        events = read_events(path)
        state = _LedgerState()
        for index, event in enumerate(events):
            _apply_event(state, event, index)
        if not state.models:
            raise LedgerFormatError(f"{path}: no init event")
        return cls(path, state)

    def _append(self, event: dict) -> None:
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(event, sort_keys=True) + "\n")

    # -- queries -----------------------------------------------------------

    @property
    def models(self) -> tuple[str, ...]:
        return self._state.models

    @property
    def budget_per_model(self) -> int:
        return self._state.budget

    @property
    def current_version(self) -> int:
        return self._state.current_version

    @property
    def space_versions(self) -> tuple[str, ...]:
        return tuple(self._state.space_versions)

    @property
    def trials(self) -> tuple[TrialRecord, ...]:
        return tuple(self._state.trials.values())

    @property
    def expansions(self) -> tuple[Expansion, ...]:
        return tuple(self._state.expansions)

    def trial(self, trial_id: str) -> TrialRecord:
        try:
            return self._state.trials[trial_id]
        except KeyError:
            raise UnknownTrial(trial_id) from None

    def remaining_budget(self, model: str) -> int:
        if model not in self._state.models:
            raise UnknownModel(model)
        used = self._state.trial_count(model, self._state.current_version)
        return self._state.budget - used

    # -- mutations ---------------------------------------------------------

    def draw_trial(self, model: str, seed: int, clock: Callable[[], str] = _utc_now) -> TrialRecord:
        if model not in self._state.models:
            raise UnknownModel(model)
        version = self._state.current_version
        if self._state.trial_count(model, version) >= self._state.budget:
            raise BudgetExhausted(
                f"model {model!r} has no budget left at space version {version}"
            )
        trial_id = f"t{len(self._state.trials) + 1:05d}"
        assignment = sample_assignment(self._state.space_versions[-1], version, seed)
        record = TrialRecord(
            trial_id=trial_id,
            model=model,
            space_version=version,
            seed=seed,
            assignment=assignment,
        )
        self._append(
            {
                "event": "draw",
                "trial_id": trial_id,
                "model": model,
                "space_version": version,
                "seed": seed,
                "assignment": assignment,
                "ts": clock(),
            }
        )
        self._state.trials[trial_id] = record
        return record

    def report_result(
        self,
        trial_id: str,
        outcome: str,
        accuracy: float | None = None,
        reason: str | None = None,
        clock: Callable[[], str] = _utc_now,
    ) -> TrialRecord:
        record = self.trial(trial_id)
        if record.outcome != "pending":
            raise AlreadyReported(f"trial {trial_id} already has outcome {record.outcome!r}")
        if outcome == "trained":
            if accuracy is None or not 0.0 <= accuracy <= 1.0:
                raise ValidationError("trained outcome needs an accuracy in [0, 1]")
            updated = replace(record, outcome="trained", accuracy=accuracy)
        elif outcome == "failed_to_train":
            if not reason:
                raise ValidationError("failed_to_train outcome needs a reason")
            updated = replace(record, outcome=outcome, reason=reason)
        else:
            raise ValidationError(f"unknown outcome {outcome!r}")
        event = {"event": "result", "trial_id": trial_id, "outcome": outcome, "ts": clock()}
        if accuracy is not None:
            event["accuracy"] = accuracy
        if reason is not None:
            event["reason"] = reason
        self._append(event)
        self._state.trials[trial_id] = updated
        return updated

    def request_expansion(
        self,
        new_space_text: str,
        evidence: Iterable[str],
        clock: Callable[[], str] = _utc_now,
    ) -> int:
        """New space version for all models, justified by failed trials."""
        evidence = tuple(evidence)
        if not evidence:
            raise InsufficientEvidence("expansion requires at least one failed trial")
        for trial_id in evidence:
            record = self.trial(trial_id)
            if record.outcome != "failed_to_train":
                raise InsufficientEvidence(
                    f"evidence trial {trial_id} has outcome {record.outcome!r},"
                    " expected failed_to_train"
                )
        parse_space(new_space_text)
        timestamp = clock()
        version = self._state.current_version + 1
        self._append(
            {
                "event": "expand",
                "space_version": version,
                "space": new_space_text,
                "evidence": list(evidence),
                "ts": timestamp,
            }
        )
        self._state.space_versions.append(new_space_text)
        self._state.expansions.append(
            Expansion(space_version=version, evidence=evidence, timestamp=timestamp)
        )
        return version


def _apply_event(state: _LedgerState, event: dict, index: int) -> None:
    """Strict replay used by load(); raises on any inconsistency."""
    kind = event.get("event")
    if kind == "init":
        if state.models:
            raise LedgerFormatError(f"event {index}: duplicate init")
        state.models = tuple(event["models"])
        state.budget = int(event["budget"])
        state.space_versions = [event["space"]]
    elif kind == "draw":
        trial_id = event["trial_id"]
        if trial_id in state.trials:
            raise LedgerFormatError(f"event {index}: duplicate trial id {trial_id}")
        state.trials[trial_id] = TrialRecord(
            trial_id=trial_id,
            model=event["model"],
            space_version=int(event["space_version"]),
            seed=int(event["seed"]),
            assignment=dict(event["assignment"]),
        )
    elif kind == "result":
        trial_id = event["trial_id"]
        if trial_id not in state.trials:
            raise LedgerFormatError(f"event {index}: result for unknown trial {trial_id}")
        record = state.trials[trial_id]
        state.trials[trial_id] = replace(
            record,
            outcome=event["outcome"],
            accuracy=event.get("accuracy"),
            reason=event.get("reason"),
        )
    elif kind == "expand":
        state.space_versions.append(event["space"])
        state.expansions.append(
            Expansion(
                space_version=int(event["space_version"]),
                evidence=tuple(event.get("evidence", ())),
                timestamp=str(event.get("ts", "")),
            )
        )
    else:
        raise LedgerFormatError(f"event {index}: unknown event type {kind!r}")


def read_events(path: Path | str) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"ledger not found: {path}")
    events: list[dict] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                raise LedgerFormatError(f"{path.name}:{lineno}: not valid JSON") from None
            if not isinstance(event, dict):
                raise LedgerFormatError(f"{path.name}:{lineno}: event is not an object")
            events.append(event)
    return events


@dataclass(frozen=True)
class AuditReport:
    header: tuple[str, ...]
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def _scan_events(path: Path | str) -> tuple[list[dict], list[str]]:
    """Tolerant log scan: malformed lines become violations, not exceptions."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"ledger not found: {path}")
    events: list[dict] = []
    problems: list[str] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                problems.append(f"line {lineno}: not valid JSON")
                continue
            if not isinstance(event, dict):
                problems.append(f"line {lineno}: event is not an object")
                continue
            events.append(event)
    return events, problems


def audit(path_or_events) -> AuditReport:
    """Recompute every ledger invariant from the raw log.

    Tolerant by design: a corrupted log yields violations, not exceptions,
    so that audits still run on logs that strict replay would reject.
    """
    if isinstance(path_or_events, (str, Path)):
        events, violations = _scan_events(path_or_events)
    else:
        events, violations = list(path_or_events), []
    models: set[str] = set()
    budget = 0
    version = 0
    counts: dict[tuple[str, int], int] = {}
    outcomes: dict[str, str] = {}
    initialized = False

    for index, event in enumerate(events):
        kind = event.get("event")
        if kind == "init":
            if initialized:
                violations.append(f"event {index}: duplicate init")
                continue
            initialized = True
            models = set(event.get("models", ()))
            budget = int(event.get("budget", 0))
            version = 1
            if not models:
                violations.append(f"event {index}: init with no models")
            if budget < 1:
                violations.append(f"event {index}: init with budget {budget}")
        elif kind == "draw":
            if not initialized:
                violations.append(f"event {index}: draw before init")
                continue
            model = event.get("model")
            trial_id = event.get("trial_id")
            if model not in models:
                violations.append(f"event {index}: draw for unregistered model {model!r}")
            if int(event.get("space_version", -1)) != version:
                violations.append(
                    f"event {index}: draw at space version {event.get('space_version')}"
                    f" while current is {version}"
                )
            if trial_id in outcomes:
                violations.append(f"event {index}: duplicate trial id {trial_id}")
            else:
                outcomes[str(trial_id)] = "pending"
            key = (str(model), version)
            counts[key] = counts.get(key, 0) + 1
            if counts[key] > budget:
                violations.append(
                    f"event {index}: model {model!r} exceeds budget {budget}"
                    f" at space version {version} ({counts[key]} trials)"
                )
        elif kind == "result":
            trial_id = str(event.get("trial_id"))
            if trial_id not in outcomes:
                violations.append(f"event {index}: result for unknown trial {trial_id}")
            elif outcomes[trial_id] != "pending":
                violations.append(f"event {index}: trial {trial_id} reported twice")
            else:
                outcome = event.get("outcome")
                if outcome not in ("trained", "failed_to_train"):
                    violations.append(f"event {index}: unknown outcome {outcome!r}")
                else:
                    outcomes[trial_id] = str(outcome)
        elif kind == "expand":
            if not initialized:
                violations.append(f"event {index}: expand before init")
                continue
            evidence = list(event.get("evidence", ()))
            if not evidence:
                violations.append(f"event {index}: expansion cites no evidence")
            for trial_id in evidence:
                outcome = outcomes.get(str(trial_id))
                if outcome is None:
                    violations.append(
                        f"event {index}: expansion cites unknown trial {trial_id}"
                    )
                elif outcome != "failed_to_train":
                    violations.append(
                        f"event {index}: expansion cites trial {trial_id}"
                        f" with outcome {outcome!r}"
                    )
            version += 1
        else:
            violations.append(f"event {index}: unknown event type {kind!r}")

    if not initialized:
        violations.insert(0, "ledger has no init event")

    header = (
        f"{LEDGER_FORMAT} audit",
        f"models={len(models)} budget_per_model={budget} space_versions={version}",
        f"trials={len(outcomes)} events={len(events)}",
        FRESH_BUDGET_NOTE,
    )
    return AuditReport(header=header, violations=tuple(violations))


def render_audit(report: AuditReport) -> str:
    lines = [f"# {line}" for line in report.header]
    if report.ok:
        lines.append("ok: no violations")
    else:
        lines.extend(f"violation: {v}" for v in report.violations)
    return "\n".join(lines) + "\n"
