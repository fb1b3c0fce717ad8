"""TCP environment server hosting isolated DrivingEnv instances."""

from __future__ import annotations

import json
import socketserver
import struct
import threading

from dojo.env import DrivingEnv, EpisodeConfig

from dojo.harness.protocol import (
    MSG_CLOSE,
    MSG_ERROR,
    MSG_HELLO,
    MSG_RESET,
    MSG_RESULT,
    MSG_STEP,
    PROTOCOL_VERSION,
    Message,
    build_manifest,
    decode_action,
    encode,
    encode_result,
    parse_bind,
    read_message,
)


class _Instance:
    """One hosted environment; all access serialized through its lock."""

    def __init__(self, config: EpisodeConfig):
        self.config = config
        self.env = DrivingEnv(config)
        self.lock = threading.Lock()
        self.last_seq = -1


class EnvServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, bind: tuple[str, int], max_instances: int,
                 default_config: EpisodeConfig | None = None):
        super().__init__(bind, _Handler)
        self.max_instances = max_instances
        self.default_config = default_config or EpisodeConfig()
        self.instances: dict[int, _Instance] = {}
        self.instances_lock = threading.Lock()

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address


class _Handler(socketserver.BaseRequestHandler):
    server: EnvServer

    def handle(self) -> None:
        while True:
            try:
                msg = read_message(self.request)
            except ConnectionError:
                return
            if msg is None:
                return
            try:
                reply = self._dispatch(msg)
            except Exception as exc:  # malformed input must not kill the peer
                reply = Message(
                    MSG_ERROR, msg.instance, msg.seq,
                    json.dumps({"message": str(exc)}).encode(),
                )
            self.request.sendall(encode(reply))

    def _dispatch(self, msg: Message) -> Message:
        if msg.type == MSG_HELLO:
            return self._hello(msg)
        if msg.type == MSG_CLOSE:
            with self.server.instances_lock:
                self.server.instances.pop(msg.instance, None)
            return Message(MSG_CLOSE, msg.instance, msg.seq, b"")
        inst = self.server.instances.get(msg.instance)
        if inst is None:
            raise ValueError(f"unknown instance {msg.instance}; send hello first")
        if msg.seq <= inst.last_seq:
            raise ValueError(f"sequence number {msg.seq} not increasing")
        with inst.lock:
            inst.last_seq = msg.seq
            if msg.type == MSG_RESET:
                if len(msg.payload) != 8:
                    raise ValueError("reset payload must be a u64 seed")
                (seed,) = struct.unpack("<Q", msg.payload)
                obs = inst.env.reset(master_seed=seed)
                payload = encode_result(inst.config, obs)
            elif msg.type == MSG_STEP:
                action = decode_action(inst.config, msg.payload)
                res = inst.env.step(action)
                payload = encode_result(
                    inst.config,
                    res.observation,
                    step=(res.reward, res.terminated, res.reason),
                    diagnostics=res.diagnostics,
                )
            else:
                raise ValueError(f"unknown message type {msg.type}")
        return Message(MSG_RESULT, msg.instance, msg.seq, payload)

    def _hello(self, msg: Message) -> Message:
        raw = json.loads(msg.payload.decode()) if msg.payload else {}
        if raw.get("version", PROTOCOL_VERSION) != PROTOCOL_VERSION:
            raise ValueError(f"unsupported protocol version {raw.get('version')}")
        cfg = raw.get("config")
        config = EpisodeConfig.from_dict(cfg) if cfg else self.server.default_config
        with self.server.instances_lock:
            inst = self.server.instances.get(msg.instance)
            if inst is None or inst.config != config:
                if inst is None and len(self.server.instances) >= self.server.max_instances:
                    raise ValueError(
                        f"instance limit {self.server.max_instances} reached"
                    )
                inst = _Instance(config)
                self.server.instances[msg.instance] = inst
        manifest = build_manifest(config)
        return Message(MSG_HELLO, msg.instance, msg.seq, json.dumps(manifest).encode())


def serve(bind: str, instances: int,
          config: EpisodeConfig | None = None) -> EnvServer:
    """Create a server bound to "host:port"; caller runs serve_forever()."""
    return EnvServer(parse_bind(bind), instances, config)
