from enum import Enum


class ColumnKind(str, Enum):
    """How a flight parameter is sampled."""
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


class PointClass(str, Enum):
    """DBSCAN point classes."""
    CORE = "core"
    BORDER = "border"
    NOISE = "noise"


class Head(str, Enum):
    """Output head of the BP network."""
    LINEAR = "linear"
    SOFTMAX = "softmax"


class Optimizer(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


class SkillAlgorithm(str, Enum):
    GBDT = "gbdt"
    NN = "nn"


class Phase(str, Enum):
    """Flight phases a threshold rule can be scoped to."""
    LANDING = "landing"
    TAKEOFF = "takeoff"
    CLIMB_35_1000 = "climb_35_1000"
    CLIMB_35_150 = "climb_35_150"
    CLIMB_150_400 = "climb_150_400"
    DESCENT_2000_1000 = "descent_2000_1000"
    DESCENT_1000_500 = "descent_1000_500"
    DESCENT_500_50 = "descent_500_50"
    ANY = "any"

    @property
    def is_window(self) -> bool:
        return self in (Phase.LANDING, Phase.TAKEOFF)

    @property
    def band(self):
        """(low, high, climbing) for altitude-band phases, else None."""
        return _BANDS.get(self)


_BANDS = {
    Phase.CLIMB_35_1000: (35.0, 1000.0, True),
    Phase.CLIMB_35_150: (35.0, 150.0, True),
    Phase.CLIMB_150_400: (150.0, 400.0, True),
    Phase.DESCENT_2000_1000: (1000.0, 2000.0, False),
    Phase.DESCENT_1000_500: (500.0, 1000.0, False),
    Phase.DESCENT_500_50: (50.0, 500.0, False),
}


class Comparator(str, Enum):
    """Inclusive threshold comparators."""
    GE = "ge"
    LE = "le"

    @classmethod
    def parse(cls, token: str) -> "Comparator":
        aliases = {"≥": cls.GE, ">=": cls.GE, "ge": cls.GE, "≤": cls.LE, "<=": cls.LE, "le": cls.LE}
        try:
            return aliases[str(token).strip()]
        except KeyError:
            raise ValueError(f"Unknown comparator: {token!r}")

    def violates(self, measured: float, threshold: float) -> bool:
        if self is Comparator.GE:
            return measured >= threshold
        return measured <= threshold

    def more_extreme(self, candidate: float, current: float) -> bool:
        """True if candidate is strictly further into the violation than current."""
        if self is Comparator.GE:
            return candidate > current
        return candidate < current


class SkillLabel(str, Enum):
    """Per-flight operation ratings."""
    A = "A"
    C = "C"
    F = "F"
    J = "J"
    M = "M"
    T = "T"


SKILL_LABELS = [label.value for label in SkillLabel]
