__version__ = "1.0.0"

from . import geometry
from . import noma_link
from . import interference
from . import protocols
from . import analytic
from . import monte_carlo
from . import experiments
from . import config
