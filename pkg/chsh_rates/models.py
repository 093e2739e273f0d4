import enum


class EntropyQuantity(str, enum.Enum):
    AB_00E = "AB_00E"
    AB_XYE = "AB_XYE"
    AB_E = "AB_E"
    A_00E = "A_00E"
    A_XYE = "A_XYE"
    A_E = "A_E"

    @property
    def two_sided(self) -> bool:
        return self.value.startswith("AB_")

    @property
    def fixed_inputs(self) -> bool:
        return self.value.endswith("_00E")

    @property
    def delta_free(self) -> bool:
        # delta only drops out of the four quantities that keep X, Y in the conditioning
        return self in (EntropyQuantity.AB_E, EntropyQuantity.A_E)


class CurveKind(str, enum.Enum):
    G = "G"
    F = "F"


class ProtocolVariant(str, enum.Enum):
    SPOT_CHECK = "spotcheck"
    BIASED_LOCAL = "biased"
    RECYCLED_INPUT = "recycled"


class CurveFormat(str, enum.Enum):
    CSV = "csv"
    JSON = "json"


class CompletenessBound(str, enum.Enum):
    CHERNOFF = "chernoff"
    HOEFFDING = "hoeffding"


class VerifySuite(str, enum.Enum):
    ORACLE = "oracle"
    ENVELOPE = "envelope"
    ANALYTIC = "analytic"
    GRADIENT = "gradient"
    ALL = "all"
