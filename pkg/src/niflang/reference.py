"""Reference parking-chain parameters.

These seven variances and six dependence coefficients are the bundled
reference values for the seven-primitive parallel-parking chain
(l1, alpha1, l2, alpha2, l3, alpha3, l4).  They drive the verification
report's round-trip checks and the default expert-trace generator; the
means come from the shipped nominal maneuver, not from this table.
"""

from __future__ import annotations

from .gbn import Gbn, MotionDirection, MotionType, chain

PARKING_LABELS = ("l1", "alpha1", "l2", "alpha2", "l3", "alpha3", "l4")

PARKING_VARIANCES = (0.0062, 0.0032, 0.0019, 0.022, 0.0008, 0.0178, 0.0013)

PARKING_COEFFS = (0.7968, -0.2086, 0.5475, -0.0045, 1.1920, -0.0968)

# Nominal maneuver magnitudes (m / rad) shipped as repository defaults;
# chosen so the dead-reckoned endpoint lands in the default parking spot.
PARKING_MEANS = (0.55, 0.8, 0.5, 0.4, 0.3, 0.4, 0.15)

PARKING_MOTIONS = (
    (MotionType.DRIVE, MotionDirection.BACKWARD),
    (MotionType.TURN, MotionDirection.FORWARD),
    (MotionType.DRIVE, MotionDirection.BACKWARD),
    (MotionType.TURN, MotionDirection.BACKWARD),
    (MotionType.DRIVE, MotionDirection.BACKWARD),
    (MotionType.TURN, MotionDirection.BACKWARD),
    (MotionType.DRIVE, MotionDirection.BACKWARD),
)


def parking_chain(means=PARKING_MEANS) -> Gbn:
    """The reference seven-node chain with the given means."""
    return chain(
        list(means),
        list(PARKING_VARIANCES),
        list(PARKING_COEFFS),
        labels=PARKING_LABELS,
        motions=list(PARKING_MOTIONS),
    )
