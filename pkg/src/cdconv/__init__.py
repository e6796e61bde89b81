"""Sparse convolutions on continuous domains.

Point-cloud neighborhoods (grid-accelerated ball search, kNN), farthest-point
and rejection subsampling, monomial-basis convolutions with analytic
gradients, and a dual batch/streaming event-convolution engine whose two
paths are numerically equivalent.
"""

from .backend import available_backends, get_backend, set_backend, use_backend
from .conv import (BatchLayout, FeaturelessParams, KernelParams, Ordering,
                   block_diagonalize, choose_ordering, conv_backward,
                   conv_forward, conv_forward_counted, featureless_forward,
                   multiply_adds)
from .events import (EventEdgeSet, EventKernelParams, EventStream, LIFConfig,
                     build_event_edges, event_conv_backward,
                     event_conv_forward, induced_neighborhood_tensor,
                     lif_subsample, output_grid, polarity_features)
from .geometry import (GridIndex, Neighborhood, PointCloud, ball_search,
                       brute_force_ball_search, build_grid_index, knn_search)
from .kernels import (BasisSet, NeighborhoodTensor, build_neighborhood_tensor,
                      eval_basis, monomial_basis)
from .sampling import (MaxDistanceQueue, QueueEmptyError, SampleResult,
                       approx_ifp_no_rejection, approx_ifp_sample,
                       approx_ifp_with_rejection, ifp_sample, rejection_sample)
from .streaming import (StreamState, dual_equivalence_check, run_streaming,
                        stream_init, stream_on_input, stream_query_output)

__version__ = "0.1.0"
