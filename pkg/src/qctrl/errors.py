"""Exception hierarchy for the qctrl package."""


class QctrlError(Exception):
    """Base class for all qctrl errors."""


class SpecValidationError(QctrlError):
    """A system description violates one of its structural invariants."""


class NotConnected(QctrlError):
    """The coupling graph is disconnected; carries the connected components."""

    def __init__(self, components):
        self.components = [tuple(sorted(c)) for c in components]
        super().__init__(f"coupling graph has {len(self.components)} components: "
                         f"{self.components}")


class ResonantGap(QctrlError):
    """An eigenvalue gap collides with the gap of another coupled pair."""


class DecoupledEdge(QctrlError):
    """The requested edge has zero coupling."""


class EdgeNotInChain(QctrlError):
    """The requested edge is not part of the certified chain."""


class NotMConnected(QctrlError):
    """The chain restricted to a prefix of levels does not connect them."""


class ZeroValueStep(QctrlError):
    """A control step with nonpositive value cannot be time-reparametrized."""


class DegenerateGaps(QctrlError):
    """The leading gap modulus coincides with another gap modulus."""


class ResonantTruncation(QctrlError):
    """A gap collision inside the chosen truncation blocks averaging."""


class PhaseCorrectionUndefined(QctrlError):
    """Equal eigenvalues on an edge leave the phase correction undefined."""


class SlopeCapExceeded(QctrlError):
    """A ramp of the synthesized primitive exceeds the slope cap."""


class TrackingInfeasible(QctrlError):
    """Averaging slots are too coarse for the requested schedule step."""


class NotLowestTerms(QctrlError):
    """A rational input is not reduced to lowest terms."""


class NotFoundWithin(QctrlError):
    """Drift search exhausted the allowed horizon; carries the horizon."""

    def __init__(self, t_max):
        self.t_max = t_max
        super().__init__(f"no drift time found within t_max={t_max}")


class TruncationTooLarge(QctrlError):
    """Requested truncation exceeds the stored system size."""


class CommutatorOverflow(QctrlError):
    """Iterated commutator entries exceeded the overflow guard."""


class UnitarityBreach(QctrlError):
    """A propagator drifted from unitarity beyond the allowed budget."""


class RoundLimit(QctrlError):
    """Steering rounds exhausted; carries the fidelity reached so far."""

    def __init__(self, achieved_fidelity, rounds):
        self.achieved_fidelity = achieved_fidelity
        self.rounds = rounds
        super().__init__(f"round limit hit after {rounds} rounds, "
                         f"fidelity reached {achieved_fidelity:.4f}")
