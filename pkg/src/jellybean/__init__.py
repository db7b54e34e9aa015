"""Activity-fingerprint device pairing over simulated mmWave links.

Two devices that watch the same human activity block their shared beam at
the same moments; both turn the timing of those blockages into a bit string
and agree on a key through a fuzzy commitment. ``jellybean.simenv`` builds
the radio scene, ``fingerprint`` turns CSI into bits, ``keyagree`` runs the
commitment, ``uph`` adds path hopping, ``adversary`` models the attackers
and ``scenario``/``cli`` drive whole experiments.
"""

from .errors import JellybeanError
from .fingerprint import AfParams, Fingerprint, default_af_params, fingerprint
from .keyagree import PairingOutcome, pair, pair_fingerprints
from .metrics import apen, bmr, sbr
from .rs import RsCode
from .simenv import ActivityParams, CsiTrace, Scene, run_sounding, two_node_scene, two_path_scene

__version__ = "0.1.0"

__all__ = [
    "ActivityParams", "AfParams", "CsiTrace", "Fingerprint", "JellybeanError", "PairingOutcome",
    "RsCode", "Scene", "apen", "bmr", "default_af_params", "fingerprint", "pair",
    "pair_fingerprints", "run_sounding", "sbr", "two_node_scene", "two_path_scene",
]
