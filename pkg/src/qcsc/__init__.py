"""Desk-scale simulator of quantum-centric supercomputing: QPUs, HPC nodes, schedulers and hybrid workloads."""

__version__ = "0.1.0"
