from .errors import *
from .algebra import *
from .model import *
from .gamma_profile import *
from .lindblad import *
from .integrator import *
from .propagate import *
from .adiabatic import *
from .transition import *
from .config import *
from .sweep import *
