from . import errors
from . import utils
from . import ttl_core
from . import ltl_bridge
from . import symbolic_module
from . import gridworld
from . import agents
from . import harness
from . import visualization

__version__ = "0.1.0"
