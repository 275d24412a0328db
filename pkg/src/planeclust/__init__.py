"""Plane-based clustering with ramp costs, plus kmeans/kPC/PPC baselines."""
from .baselines import CentroidModel, kmeans_fit, kpc_fit, kpc_plane, ppc_fit, ppc_plane
from .cluster import KernelModel, PlaneModel, assign, fit, gram, load_model, predict, save_model
from .data import (ClusterSplit, Dataset, load_csv, nng_init, random_init, split_cluster,
                   standardize, write_csv)
from .estimators import KPlaneClustering, LloydKMeans, ProximalPlaneClustering, RampTWSVC
from .metrics import MetricReport, nmi, rand_accuracy
from .ramp import HyperParams, Plane, deviation, export_loss_curves, plane_objective, ramp_r1, ramp_r2
from .solver import CccpState, SolverOptions, solve_plane_cccp, solve_subproblem, update_p

__version__ = "0.1.0"
