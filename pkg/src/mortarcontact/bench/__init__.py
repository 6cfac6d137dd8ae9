"""Benchmark scenes, their analytic oracles and the file-driven scene runner."""
from .embed import EmbedReport, run_embed
from .hertz import HertzOracle, HertzSummary, hertz_scene_text, run_hertz
from .patch import PatchReport, patch_scene_text, run_patch_test
from .runner import RunResult, build_scene, run_scene
from .scene import SceneConfig, SceneError, parse_scene, parse_scene_text

__all__ = [
    "EmbedReport", "run_embed", "HertzOracle", "HertzSummary", "hertz_scene_text", "run_hertz",
    "PatchReport", "patch_scene_text", "run_patch_test", "RunResult", "build_scene", "run_scene",
    "SceneConfig", "SceneError", "parse_scene", "parse_scene_text",
]
