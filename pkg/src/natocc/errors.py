"""Exception hierarchy.

Every error carries the name of the module that raised it and a short
remediation hint, so the command-line front end can surface both.
"""


class NatoccError(Exception):
    module = "natocc"
    hint = ""

    def __init__(self, message, *, hint=None, **context):
        super().__init__(message)
        if hint is not None:
            self.hint = hint
        self.context = dict(context)

    def to_dict(self):
        out = {
            "error": type(self).__name__,
            "module": self.module,
            "message": str(self),
            "hint": self.hint,
        }
        out.update(self.context)
        return out


# fock
class FockError(NatoccError, ValueError):
    module = "fock"
    hint = "check particle and site counts (0 <= N <= 2L, L >= 1)"


# model
class ModelError(NatoccError, ValueError):
    module = "model"
    hint = "check the Hamiltonian parameters and basis options"


class NonUnitaryTransform(ModelError):
    hint = "re-orthonormalize the orbital matrix (e.g. polar decomposition) before transforming"


# rdm
class RDMError(NatoccError, ValueError):
    module = "rdm"


class UnnormalizedState(RDMError):
    hint = "normalize the amplitude vector before computing density matrices"


class DegenerateSpectrum(RDMError):
    hint = "use non-strict mode or the 'perturb' jitter option to split degenerate occupations"


# gpc
class GPCError(NatoccError, ValueError):
    module = "gpc"


class DimensionMismatch(GPCError):
    hint = "psi, basis and the constraint's orbital map must have consistent lengths"


class GapTooSmall(GPCError):
    hint = "the unperturbed ground state must be non-degenerate; pick another sector or model"


# sector_map
class SectorMapError(NatoccError, ValueError):
    module = "sector_map"


class NotSquare(SectorMapError):
    hint = ("the sector has more determinants than independent occupations; "
            "use pinning to truncate the determinant list first")


class Singular(SectorMapError):
    hint = "no elimination choice yields an invertible amplitude map for this sector"


class SectorOverlapViolation(SectorMapError):
    hint = "sector determinants must pairwise differ by at least two orbitals"


class SumRuleViolation(SectorMapError):
    hint = "the occupation vector does not satisfy the sector's spin sum rules"


class OutOfSectorPolytope(SectorMapError):
    hint = "the occupations are not representable by a state of this sector"


# dynamics
class DynamicsError(NatoccError, ValueError):
    module = "dynamics"


class DegenerateOccupations(DynamicsError):
    hint = ("natural occupations coincide, so the orbital equation is singular; "
            "start from a non-degenerate state or enable the 'perturb' option")


class OverlapCollapse(DynamicsError):
    hint = "orbital snapshots are too far apart; reduce the time step"


class GridMismatch(DynamicsError):
    hint = "trajectories must share an identical time grid"


class GridError(DynamicsError):
    hint = "(t_end - t_start) / h must be a positive integer"


class AmplitudeCollapse(UserWarning):
    """Issued when a square amplitude drops below the phase-freeze threshold."""


# cli
class ConfigError(NatoccError):
    module = "cli"
    hint = "see docs/config.md for the configuration schema"
