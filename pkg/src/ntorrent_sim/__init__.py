"""Discrete-event simulation of nTorrent peer-to-peer file sharing over NDN."""

from .engine import Network, NodeSpec, RunReport
from .packets import Data, Interest, Nack, NackReason, Name
from .scenarios import build_network, builtin_scenario
from .torrent import TorrentParams, build_torrent

__all__ = [
    "Data", "Interest", "Nack", "NackReason", "Name", "Network", "NodeSpec", "RunReport",
    "TorrentParams", "build_network", "build_torrent", "builtin_scenario",
]
__version__ = "0.1.0"
