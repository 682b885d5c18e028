"""Default model parameters for the HeLa ER/NE system.

Values are the measured/estimated set used throughout: junction count and
radius from electron tomography, reservoir volumes from volume-EM studies,
reporter diffusivities from FRAP in the ER lumen. Units are um and seconds.
"""

import math

from .geometry import Cone, Reporter

JUNCTION_COUNT = 40
V_ER_UM3 = 200.0
V_NE_UM3 = 30.0

JUNCTION_RADIUS_UM = 11e-3
JUNCTION_LENGTH_UM = 10e-3
OPENING_ANGLE_DEG = 25.0

#: moxGFP-KDEL-class reporter (~30 kDa)
SMALL_REPORTER = Reporter(name="small", D_um2_s=3.3, r_um=1.75e-3)
#: NusA fusion-class reporter (~120 kDa); r may plausibly range up to 6e-3 um
LARGE_REPORTER = Reporter(name="large", D_um2_s=0.52, r_um=2.5e-3)

REPORTERS = {r.name: r for r in (SMALL_REPORTER, LARGE_REPORTER)}

SWEEP_L_UM = (5e-3, 10e-3, 20e-3)
SWEEP_ALPHA_DEG = (0.0, 25.0, 50.0)

N_CELLS = 64
DT_S = 1e-3


def default_junction() -> Cone:
    return Cone(
        R_um=JUNCTION_RADIUS_UM,
        alpha_rad=math.radians(OPENING_ANGLE_DEG),
        L_um=JUNCTION_LENGTH_UM,
    )
