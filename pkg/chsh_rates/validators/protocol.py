from chsh_rates.exceptions import CurveMismatchError
from chsh_rates.log_config import get_logger
from chsh_rates.models import CurveKind, EntropyQuantity, ProtocolVariant

logger = get_logger("protocol-validators")

ACCEPTED_QUANTITIES = {
    ProtocolVariant.RECYCLED_INPUT: (EntropyQuantity.AB_XYE, EntropyQuantity.A_XYE),
    ProtocolVariant.SPOT_CHECK: (EntropyQuantity.AB_00E, EntropyQuantity.A_00E),
    ProtocolVariant.BIASED_LOCAL: (EntropyQuantity.AB_00E, EntropyQuantity.A_00E),
}


def validate_curve_for_protocol(variant: ProtocolVariant, curve) -> None:
    """Raise CurveMismatchError unless ``curve`` can feed the EAT for ``variant``."""
    accepted = ACCEPTED_QUANTITIES[ProtocolVariant(variant)]
    if curve.kind != CurveKind.F:
        logger.warning("Curve is not an envelope", extra={"kind": curve.kind.value})
        raise CurveMismatchError(f"{variant.value} needs an F curve, got kind={curve.kind.value}")
    if curve.quantity not in accepted:
        logger.warning(
            "Curve quantity does not match protocol",
            extra={"quantity": curve.quantity.value, "variant": variant.value},
        )
        raise CurveMismatchError(
            f"{variant.value} needs one of {[q.value for q in accepted]}, got {curve.quantity.value}"
        )
    if variant == ProtocolVariant.RECYCLED_INPUT and not curve.pxy.is_uniform():
        raise CurveMismatchError("recycled-input protocol needs a curve computed for uniform inputs")
