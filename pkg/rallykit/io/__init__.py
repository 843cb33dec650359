from .config import *
from .logs import *
from .manifest import *
