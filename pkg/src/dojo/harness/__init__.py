from dojo.harness.metrics import MetricsReport, RunRecord, iqm, rates
from dojo.harness.protocol import (
    IMAGE_DTYPE,
    MSG_CLOSE,
    MSG_ERROR,
    MSG_HELLO,
    MSG_RESET,
    MSG_RESULT,
    MSG_STEP,
    PROTOCOL_VERSION,
    VECTOR_DTYPE,
    Message,
    build_manifest,
    decode_action,
    decode_result,
    encode,
    encode_action,
    encode_result,
    parse_bind,
    read_message,
)
from dojo.harness.render import draw_network, load_log, render_episode, render_map
from dojo.harness.rollout import (
    POLICIES,
    RandomPolicy,
    ScriptedFollowPolicy,
    make_policy,
    parse_seed_range,
    run_rollouts,
)
from dojo.harness.server import EnvServer, serve

__all__ = [
    "MetricsReport",
    "RunRecord",
    "iqm",
    "rates",
    "Message",
    "PROTOCOL_VERSION",
    "VECTOR_DTYPE",
    "IMAGE_DTYPE",
    "MSG_HELLO",
    "MSG_RESET",
    "MSG_STEP",
    "MSG_RESULT",
    "MSG_ERROR",
    "MSG_CLOSE",
    "build_manifest",
    "encode",
    "read_message",
    "encode_action",
    "decode_action",
    "encode_result",
    "decode_result",
    "parse_bind",
    "draw_network",
    "load_log",
    "render_episode",
    "render_map",
    "POLICIES",
    "RandomPolicy",
    "ScriptedFollowPolicy",
    "make_policy",
    "parse_seed_range",
    "run_rollouts",
    "EnvServer",
    "serve",
]
