import importlib.metadata

__version__ = importlib.metadata.version("cciattest")
__authors__ = importlib.metadata.metadata("cciattest")["Author-Email"]
