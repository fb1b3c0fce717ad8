"""Binary wire protocol for remote environment instances.

Framing (all integers little-endian):

    u32  frame_length            length of header + payload, excluding itself
    u8   message_type            one of the MSG_* constants
    u16  instance_id             which environment instance this addresses
    u32  sequence_number         per-instance, strictly increasing
    ...  payload                 message-type specific, see below

Message types and payloads:

    HELLO (1)
      client -> server: UTF-8 JSON {"version": 1, "config": <dict|null>}
      server -> client: UTF-8 JSON spec manifest, see build_manifest()
    RESET (2)
      client -> server: u64 master seed
    STEP (3)
      client -> server, by action space:
        semantic / discrete: i32 action index
        continuous:          2 x f64 (steer velocity, pedal)
    RESULT (4)
      server -> client, in reply to RESET or STEP:
        u8   kind                0 = reset reply, 1 = step reply
        (step replies only)
        f64  reward
        u8   terminated          0 or 1
        u8   reason              index into REASONS
        (all replies)
        vector observation       stacked_vector_size x f64
        image observation        3k*h*w x u8, only when birds_eye is enabled
        diagnostics              UTF-8 JSON, remaining bytes (may be empty)
    ERROR (5)
      server -> client: UTF-8 JSON {"message": <str>}; instance unaffected
    CLOSE (6)
      client -> server: empty; releases the instance. Echoed back empty.

A malformed or failing request is answered with ERROR carrying the same
instance id and sequence number; the instance stays usable.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass

import numpy as np

from dojo.env import REASONS, EpisodeConfig

PROTOCOL_VERSION = 1

MSG_HELLO = 1
MSG_RESET = 2
MSG_STEP = 3
MSG_RESULT = 4
MSG_ERROR = 5
MSG_CLOSE = 6

_HEADER = struct.Struct("<BHI")
_LENGTH = struct.Struct("<I")

VECTOR_DTYPE = "<f8"
IMAGE_DTYPE = "|u1"


@dataclass(frozen=True)
class Message:
    type: int
    instance: int
    seq: int
    payload: bytes


def encode(msg: Message) -> bytes:
    header = _HEADER.pack(msg.type, msg.instance, msg.seq)
    return _LENGTH.pack(len(header) + len(msg.payload)) + header + msg.payload


def read_message(sock: socket.socket) -> Message | None:
    """Read one framed message; None on clean EOF at a frame boundary."""
    raw_len = _read_exact(sock, _LENGTH.size, allow_eof=True)
    if raw_len is None:
        return None
    (length,) = _LENGTH.unpack(raw_len)
    if length < _HEADER.size:
        raise ConnectionError(f"frame shorter than header: {length}")
    body = _read_exact(sock, length)
    mtype, instance, seq = _HEADER.unpack_from(body)
    return Message(mtype, instance, seq, body[_HEADER.size :])


def _read_exact(sock: socket.socket, n: int, allow_eof: bool = False) -> bytes | None:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            if allow_eof and got == 0:
                return None
            raise ConnectionError("peer closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def build_manifest(config: EpisodeConfig) -> dict:
    """Spec manifest negotiated at hello time; also what `dojo spec` prints."""
    spec = config.observation
    if config.action_space == "continuous":
        action = {"kind": "continuous", "shape": [2], "dtype": "<f8"}
    elif config.action_space == "discrete":
        action = {"kind": "discrete", "n": 25}
    else:
        action = {"kind": "semantic", "n": 5}
    obs = spec.manifest()
    obs["vector_dtype"] = VECTOR_DTYPE
    if spec.has_image:
        obs["image_dtype"] = IMAGE_DTYPE
    return {
        "protocol_version": PROTOCOL_VERSION,
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "action_space": action,
        "observation": obs,
        "reasons": list(REASONS),
    }


def encode_action(config: EpisodeConfig, action) -> bytes:
    if config.action_space == "continuous":
        arr = np.asarray(action, dtype=np.float64).reshape(-1)
        if arr.shape != (2,):
            raise ValueError("continuous action must have shape (2,)")
        return arr.tobytes()
    return struct.pack("<i", int(action))


def decode_action(config: EpisodeConfig, payload: bytes):
    if config.action_space == "continuous":
        if len(payload) != 16:
            raise ValueError(f"continuous action payload must be 16 bytes, got {len(payload)}")
        return np.frombuffer(payload, dtype=np.float64).copy()
    if len(payload) != 4:
        raise ValueError(f"action payload must be 4 bytes, got {len(payload)}")
    return struct.unpack("<i", payload)[0]


def encode_result(config: EpisodeConfig, obs, step=None, diagnostics: dict | None = None) -> bytes:
    parts = []
    if step is None:
        parts.append(b"\x00")
    else:
        reward, terminated, reason = step
        parts.append(b"\x01")
        parts.append(struct.pack("<dBB", reward, int(terminated), REASONS.index(reason)))
    parts.append(np.ascontiguousarray(obs.vector, dtype=VECTOR_DTYPE).tobytes())
    if config.observation.has_image:
        parts.append(np.ascontiguousarray(obs.image, dtype=np.uint8).tobytes())
    if diagnostics:
        parts.append(json.dumps(diagnostics, sort_keys=True).encode())
    return b"".join(parts)


def decode_result(manifest: dict, payload: bytes) -> dict:
    """Parse a RESULT payload per the negotiated manifest."""
    obs_m = manifest["observation"]
    out: dict = {}
    off = 1
    if payload[0] == 1:
        reward, terminated, reason = struct.unpack_from("<dBB", payload, off)
        off += 10
        out.update(
            reward=reward,
            terminated=bool(terminated),
            reason=manifest["reasons"][reason],
        )
    n = obs_m["stacked_vector_size"]
    vec = np.frombuffer(payload, dtype=obs_m["vector_dtype"], count=n, offset=off)
    off += vec.nbytes
    out["vector"] = vec.copy()
    if "image_shape" in obs_m:
        shape = tuple(obs_m["image_shape"])
        count = int(np.prod(shape))
        img = np.frombuffer(payload, dtype=obs_m["image_dtype"], count=count, offset=off)
        off += img.nbytes
        out["image"] = img.reshape(shape).copy()
    rest = payload[off:]
    out["diagnostics"] = json.loads(rest) if rest else {}
    return out


def parse_bind(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)
