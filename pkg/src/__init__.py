"""
BFT Consensus Under Churn Simulator

Stochastic models of node drops, membership churn, mobility-adjusted BFT
quorums and gossip dissemination, with Monte Carlo latency experiments and
beta-distribution fitting.
"""

__version__ = "1.0.0"
