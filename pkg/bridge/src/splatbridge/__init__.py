from .mock import MockModel
from .server import BridgeServer, BridgeSession, main
from .schedule import linear_alpha_bar, table

__all__ = ["BridgeServer", "BridgeSession", "MockModel",
           "linear_alpha_bar", "main", "table"]
