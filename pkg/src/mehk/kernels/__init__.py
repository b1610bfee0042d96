"""Hot numeric kernels with two interchangeable backends.

The numba backend JIT-compiles the per-episode control loop (the
dominant cost: thousands of episodes, each integrating 10^5 physics
substeps and updating a homeokinetic controller at 10 Hz). The numpy
backend is a vectorized reference implementation used as a fallback and
as the parity oracle in tests.

Selection via the MEHK_NUMBA environment variable, read at import time:
  unset / "auto"  use numba when importable, else numpy
  "0" "off"       force the numpy backend
  "1" "on"        require numba (ImportError if unavailable)

Both backends export the same functions:
  hk_step, mlp_forward, elman_step, read_sensors, advance,
  run_episode_core
"""

import os

_choice = os.environ.get("MEHK_NUMBA", "auto").lower()

if _choice in ("0", "off", "false", "no"):
    from . import numpy_backend as impl
    BACKEND = "numpy"
elif _choice in ("1", "on", "true", "yes"):
    from . import numba_backend as impl
    BACKEND = "numba"
else:
    try:
        from . import numba_backend as impl
        BACKEND = "numba"
    except ImportError:
        from . import numpy_backend as impl
        BACKEND = "numpy"

hk_step = impl.hk_step
mlp_forward = impl.mlp_forward
elman_step = impl.elman_step
read_sensors = impl.read_sensors
advance = impl.advance
run_episode_core = impl.run_episode_core

FAMILY_HK = 0
FAMILY_FIXED = 1
FAMILY_ELMAN = 2
FAMILY_ZERO = 3

TASK_EXPLORE = 0
TASK_HILL = 1
TASK_LOCO_FLAT = 2
TASK_LOCO_ROUGH = 3
TASK_MANIP = 4
