"""Demonstration-to-plan toolkit with LLM-in-the-loop refinement."""

from .btree import BehaviorTree, ExecTrajectory, Grasp, Sequence, Status, TargetEntry, from_xml, tick, to_xml
from .demo import Demonstration, ObjectModel, Trajectory, load_demonstration, save_demonstration
from .labels import SemanticTargetPose, parse_desc, snap_angle
from .repair import validate_and_repair
from .semcodec import CodecConfig, classify_vertical, decode_plan, dominant_rotation, encode_plan, nearest_interaction_point
from .segmentation import WindowConfig, generate_plan, mi_series, mutual_information
from .transforms import RigidTransform, compose, relative_pose

__version__ = "0.1.0"
