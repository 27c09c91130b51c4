"""Exception types raised across the library.

Every error that maps to a CLI exit code lives here so the command layer
can translate failures without importing each numerical module.
"""


class AdaptlimError(Exception):
    """Base class for all library errors."""


class NoRelativeDegree(AdaptlimError):
    """Some input column never produces a nonzero Markov parameter."""


class RankDeficient(AdaptlimError):
    """The leading Markov-parameter matrix does not have full column rank."""


class PencilDegenerate(AdaptlimError):
    """The system pencil is identically singular; zeros are undefined."""


class NotStabilizable(AdaptlimError):
    """(A, B) has an uncontrollable unstable mode."""


class NoStabilizingSolution(AdaptlimError):
    """The Riccati equation admits no stabilizing solution."""


class NotHurwitz(AdaptlimError):
    """A matrix required to be Hurwitz has an eigenvalue with Re >= 0."""


class AssumptionViolation(AdaptlimError):
    """A plant fails one of the construction assumptions.

    ``index`` identifies which assumption failed (1..5).
    """

    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"assumption {index}: {message}")


class RelativeDegreeMismatch(AdaptlimError):
    """Augmentation did not produce the expected uniform relative degree."""


class SquareUpFailed(AdaptlimError):
    """No fictitious input columns passing the zero/degree checks were found."""


class SMatrixSingular(AdaptlimError):
    """The output-mixing matrix C * [B21, Bs1] is rank deficient."""


class SprInfeasible(AdaptlimError):
    """No feedback strength up to the configured cap certifies passivity."""


class Infeasible(AdaptlimError):
    """A passivity certificate could not be produced for the given matrices.

    ``achieved_margin`` is the best min-eigenvalue of the candidate Q.
    """

    def __init__(self, message: str, achieved_margin: float = float("nan")):
        self.achieved_margin = achieved_margin
        super().__init__(message)


class NonFiniteState(AdaptlimError):
    """Integration produced a non-finite value in the named component."""

    def __init__(self, component: str, t: float):
        self.component = component
        self.t = t
        super().__init__(f"non-finite value in '{component}' at t={t:.6g}")
