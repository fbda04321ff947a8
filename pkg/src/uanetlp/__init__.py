"""UAV ad hoc network topology simulation and multi-scale temporal link
prediction: mobility models, weighted snapshots, community detection, a
from-scratch differentiable GAT+LSTM predictor, and ranking metrics."""

__version__ = "0.1.0"
