"""evflow: event-camera optical flow toolkit.

Event-window image encoding, the self-supervised photometric/smoothness
objective and its gradient, a coarse-to-fine variational flow estimator, an
events-only local plane-fit estimator, ground-truth flow from poses and
depth, masked endpoint-error metrics, and bit-exact readers/writers for the
on-disk formats.
"""

from .camera import CameraModel, dump_camera_json, load_camera_json
from .core import (DepthMap, Event, EventStream, FlowField, Frame, PoseSample,
                   Trajectory)
from .errors import DataError, EvflowError, FormatError
from .event_image import (EventImage, EventWindow, encode, event_mask,
                          read_event_image_raw, slice_window,
                          write_event_image_raw)
from .formats import (read_depth, read_events, read_flo, read_frame_index,
                      read_frame_pgm, read_trajectory, write_depth,
                      write_events, write_flo, write_frame_index,
                      write_frame_pgm, write_trajectory)
from .loss import (CharbonnierParams, LossBreakdown, LossWeights,
                   bilinear_sample, charbonnier, charbonnier_grad,
                   downsample_flow, downsample_frame, loss_gradient,
                   photometric_loss, smoothness_loss, total_loss, warp)
from .metrics import EvalReport, endpoint_error_map, evaluate
from .motionfield import (GtFlowOptions, GtFlowRequest, VelocitySample,
                          differentiate_pose, generate_gt_flow,
                          interpolate_pose, motion_field, smooth_velocities,
                          windowed_pair_velocity)
from .planefit import (PlaneFitOptions, SparseFlowEstimate,
                       collect_neighborhood, estimate_sparse_flow, fit_plane,
                       plane_to_flow, robust_fit)
from .rotation import (quaternion_to_rotation, rotation_exp, rotation_log,
                       rotation_to_quaternion, skew, unskew)
from .synth import OrbitParams, make_edge_sweep, make_orbit, make_shift_pair
from .variational import (LevelTrace, SolverOptions, build_pyramid,
                          estimate_flow, solve_level, upsample_flow)

__version__ = "0.1.0"
