"""Generative motion prior for humanoid locomotion.

Retargets human motion onto a robot skeleton, learns an auto-regressive
motion generator with a command-conditioned latent sampler, and scores
imitation quality with standard sequence metrics.
"""

__version__ = "0.1.0"

from .model import RobotModel, default_model, forward_kinematics, load_model
from .dataset import MotionClip, RobotPose, featurize, load_clip, mirror_x, save_clip, synth_gait

__all__ = [
    "RobotModel",
    "default_model",
    "forward_kinematics",
    "load_model",
    "MotionClip",
    "RobotPose",
    "featurize",
    "load_clip",
    "mirror_x",
    "save_clip",
    "synth_gait",
]
