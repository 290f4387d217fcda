"""Local operations and time-ordered two-party experiments.

Linear operations (unitaries, CPTP maps, unread measurements) act on density
matrices. The hypothetical flip device and other pure-state rules have no
defined action on half of an entangled state: they act only on explicitly
given ensembles whose target-side members are pure, or through a stated
joint-output hypothesis.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

from .channels import ChoiMatrix
from .qcore import (
    I2,
    Branch,
    DensityMatrix,
    InvalidStateError,
    Ket,
    Party,
    ProjectiveMeasurement,
    embed,
    measure_update,
    orthogonal_pure,
    partial_trace,
    product_factor,
    tensor,
    trace_distance,
)

LOOKUP_TOL = 1e-9
UNITARY_TOL = 1e-12


class UndefinedActionError(RuntimeError):
    """The operation has no defined action on the given input."""


@dataclass(frozen=True, eq=False)
class Unitary:
    u: np.ndarray
    name: str = "unitary"

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        if u.shape != (2, 2) or np.max(np.abs(u.conj().T @ u - I2)) > UNITARY_TOL:
            raise ValueError(f"{self.name}: not a 2x2 unitary")
        object.__setattr__(self, "u", u)


@dataclass(frozen=True, eq=False)
class Cptp:
    choi: ChoiMatrix
    name: str = "cptp"


@dataclass(frozen=True, eq=False)
class BlackBoxJoint:
    """Hypothesised joint outputs, keyed by named joint inputs."""

    table: tuple  # of (name, input DensityMatrix, output DensityMatrix)
    name: str = "black-box"

    def lookup(self, rho: DensityMatrix) -> DensityMatrix | None:
        for _, key, out in self.table:
            if trace_distance(key, rho) <= LOOKUP_TOL:
                return out
        return None


@dataclass(frozen=True, eq=False)
class EnsembleMap:
    """Pure-state rule applied member-by-member to an explicit ensemble."""

    rule: Callable[[Ket], Ket]
    name: str = "ensemble-map"
    hypothesis: BlackBoxJoint | None = None


@dataclass(frozen=True, eq=False)
class PureFlip:
    """The universal flip device: ``|ψ> ↦ |ψ⊥>`` on pure inputs only."""

    hypothesis: BlackBoxJoint | None = None
    name: str = "flip"

    @property
    def rule(self) -> Callable[[Ket], Ket]:
        return orthogonal_pure


StateMap = Union[Unitary, Cptp, PureFlip, EnsembleMap, BlackBoxJoint]
Operation = Union[StateMap, ProjectiveMeasurement]


class EnsembleTerm(NamedTuple):
    probability: float
    other: DensityMatrix  # state of the non-target party
    target: Ket


@dataclass(frozen=True, eq=False)
class LocalEnsemble:
    """Explicit decomposition ``Σ p_i other_i ⊗ |target_i><target_i|``.

    ``target`` names the party whose members are pure kets.
    """

    target: Party
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "target", Party.parse(self.target))
        terms = tuple(EnsembleTerm(*t) for t in self.terms)
        total = sum(t.probability for t in terms)
        if abs(total - 1.0) > 1e-12:
            raise InvalidStateError(f"ensemble probabilities sum to {total!r}")
        object.__setattr__(self, "terms", terms)

    def joint(self, term: EnsembleTerm, ket: Ket | None = None) -> np.ndarray:
        pure = (ket or term.target).dm()
        if self.target is Party.BOB:
            return np.kron(term.other.entries, pure.entries)
        return np.kron(pure.entries, term.other.entries)

    def average(self) -> DensityMatrix:
        return DensityMatrix(sum(t.probability * self.joint(t) for t in self.terms))

    @classmethod
    def steered(cls, rho: DensityMatrix, m: ProjectiveMeasurement, measured: Party | str) -> "LocalEnsemble":
        """Decomposition of the unread post-measurement state by outcome.

        Each conditional state must be a product with a pure factor on the
        party that did not measure.
        """
        measured = Party.parse(measured)
        target = measured.other
        branches, _ = measure_update(rho, m, measured)
        terms = []
        for b in branches:
            ket = product_factor(b.state, target)
            if ket is None:
                raise UndefinedActionError(
                    f"outcome {b.label!r} leaves {target.value} in a mixed or entangled state"
                )
            terms.append((b.probability, partial_trace(b.state, measured), ket))
        return cls(target, tuple(terms))


# --- local action ------------------------------------------------------------

def _apply_channel(choi: ChoiMatrix, party: Party, rho: np.ndarray) -> np.ndarray:
    t = rho.reshape(2, 2, 2, 2)
    j = choi.entries.reshape(2, 2, 2, 2)
    if party is Party.BOB:
        out = np.einsum("abcd,bkdl->akcl", t, j)
    else:
        out = np.einsum("abcd,akcl->kbld", t, j)
    return out.reshape(4, 4)


def _apply_rule(rule, hypothesis, name, party: Party, state) -> DensityMatrix:
    if isinstance(state, LocalEnsemble):
        if state.target is not party:
            raise UndefinedActionError(
                f"{name}: ensemble members are pure on {state.target.value}, not {party.value}"
            )
        return DensityMatrix(sum(t.probability * state.joint(t, rule(t.target)) for t in state.terms))
    ket = product_factor(state, party)
    if ket is not None:
        other = partial_trace(state, party.other)
        out = rule(ket).dm()
        return tensor(other, out) if party is Party.BOB else tensor(out, other)
    if hypothesis is not None:
        out = hypothesis.lookup(state)
        if out is not None:
            return out
    raise UndefinedActionError(
        f"{name} has no defined action on a state where {party.value}'s part is mixed or entangled"
    )


def apply_local(op: StateMap, party: Party | str, state: DensityMatrix | LocalEnsemble) -> DensityMatrix:
    """Act with ``op`` on ``party``'s half of a joint state or explicit ensemble."""
    party = Party.parse(party)
    if isinstance(op, (PureFlip, EnsembleMap)):
        return _apply_rule(op.rule, op.hypothesis, op.name, party, state)
    if isinstance(op, BlackBoxJoint):
        rho = state.average() if isinstance(state, LocalEnsemble) else state
        out = op.lookup(rho)
        if out is None:
            raise UndefinedActionError(f"{op.name}: input matches no table entry")
        return out
    rho = state.average() if isinstance(state, LocalEnsemble) else state
    if isinstance(op, Unitary):
        u = embed(op.u, party)
        return DensityMatrix(u @ rho.entries @ u.conj().T)
    if isinstance(op, Cptp):
        return DensityMatrix(_apply_channel(op.choi, party, rho.entries))
    raise TypeError(f"unsupported operation {op!r}")


def is_linear(op: Operation) -> bool:
    return isinstance(op, (Unitary, Cptp, ProjectiveMeasurement))


# --- experiments -------------------------------------------------------------

class Step(NamedTuple):
    party: Party
    op: Operation

    @property
    def key(self) -> tuple[str, str]:
        return (Party.parse(self.party).value, op_name(self.op))


def op_name(op: Operation) -> str:
    if isinstance(op, ProjectiveMeasurement):
        return f"measure-{op.name}"
    return op.name


@dataclass(frozen=True, eq=False)
class TimeOrderedExperiment:
    """Steps applied strictly in sequence to ``initial``.

    ``ensemble="proper"`` keeps measurement outcomes as recorded branches,
    so later pure-state rules act on each branch; ``"improper"`` replaces the
    state by the unread average after every measurement.
    """

    initial: DensityMatrix
    steps: tuple
    order_label: str = ""
    ensemble: str = "proper"

    def __post_init__(self):
        steps = tuple(Step(Party.parse(p), op) for p, op in self.steps)
        if self.ensemble not in ("proper", "improper"):
            raise ValueError("ensemble must be 'proper' or 'improper'")
        object.__setattr__(self, "steps", steps)


def run_branches(exp: TimeOrderedExperiment) -> tuple[Branch, ...]:
    """Outcome-conditioned final branches; labels join outcomes with ``/``."""
    branches = [Branch(1.0, "", exp.initial)]
    for step in exp.steps:
        nxt = []
        if isinstance(step.op, ProjectiveMeasurement):
            for b in branches:
                ens, avg = measure_update(b.state, step.op, step.party)
                if exp.ensemble == "improper":
                    nxt.append(Branch(b.probability, b.label, avg))
                    continue
                for sub in ens:
                    label = f"{b.label}/{sub.label}" if b.label else sub.label
                    nxt.append(Branch(b.probability * sub.probability, label, sub.state))
        else:
            for b in branches:
                nxt.append(Branch(b.probability, b.label, apply_local(step.op, step.party, b.state)))
        branches = nxt
    return tuple(branches)


def run(exp: TimeOrderedExperiment) -> DensityMatrix:
    """Final joint state, averaged over unread measurement outcomes."""
    branches = run_branches(exp)
    return DensityMatrix(sum(b.probability * b.state.entries for b in branches))


def order_swap_residual(exp_a: TimeOrderedExperiment, exp_b: TimeOrderedExperiment) -> float:
    """Trace distance between the final states of two orderings of the same steps."""
    if Counter(s.key for s in exp_a.steps) != Counter(s.key for s in exp_b.steps):
        raise ValueError("experiments must contain the same steps in a different order")
    return trace_distance(run(exp_a), run(exp_b))


def swapped(exp: TimeOrderedExperiment, label: str | None = None) -> TimeOrderedExperiment:
    """The same experiment with its step order reversed."""
    return TimeOrderedExperiment(
        exp.initial, tuple(reversed(exp.steps)), label or f"reversed({exp.order_label})", exp.ensemble
    )


def bob_flip_hypothesis(shared: DensityMatrix, chi: DensityMatrix, name: str = "chi") -> BlackBoxJoint:
    """Hypothesis table stating the flip device turns ``shared`` into ``chi``."""
    return BlackBoxJoint(((name, shared, chi),), name=f"hypothesis:{name}")
