from pathlib import Path
from typing import Union

import numpy as np
import numpy.typing as npt

PathType = Union[str, Path]
FloatArray = npt.NDArray[np.float64]
