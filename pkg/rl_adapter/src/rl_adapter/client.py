"""Blocking client for the dojo environment server.

Speaks the length-prefixed binary protocol documented in the engine repo
(docs/protocol.md); the adapter is a pure relay and adds no stochasticity.
One request is in flight per instance at a time; separate instances may be
driven from separate threads because each handle owns its own connection.
"""

from __future__ import annotations

import json
import socket
import struct

import numpy as np

PROTOCOL_VERSION = 1

MSG_HELLO = 1
MSG_RESET = 2
MSG_STEP = 3
MSG_RESULT = 4
MSG_ERROR = 5
MSG_CLOSE = 6

_HEADER = struct.Struct("<BHI")
_LENGTH = struct.Struct("<I")


class RemoteError(RuntimeError):
    """The server answered with an error reply; the instance is still usable."""


class ProtocolError(ConnectionError):
    """The byte stream violated the framing or reply contract."""


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            raise ConnectionError("server closed the connection mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


class RemoteEnv:
    """One remote environment instance behind a gym-style reset/step API."""

    def __init__(self, address: tuple[str, int], config: dict | None = None,
                 instance: int = 0, timeout: float = 30.0):
        self.instance = instance
        self._seq = 0
        self._terminated = True
        self._sock = socket.create_connection(address, timeout=timeout)
        hello = json.dumps({"version": PROTOCOL_VERSION, "config": config}).encode()
        mtype, payload = self._request(MSG_HELLO, hello)
        if mtype != MSG_HELLO:
            raise ProtocolError(f"expected hello reply, got type {mtype}")
        self.manifest = json.loads(payload.decode())
        if self.manifest.get("protocol_version") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"server speaks protocol {self.manifest.get('protocol_version')}, "
                f"client speaks {PROTOCOL_VERSION}"
            )
        self.observation = self.manifest["observation"]
        self.action_space = self.manifest["action_space"]

    # -- wire plumbing ----------------------------------------------------

    def _request(self, mtype: int, payload: bytes) -> tuple[int, bytes]:
        self._seq += 1
        header = _HEADER.pack(mtype, self.instance, self._seq)
        self._sock.sendall(_LENGTH.pack(len(header) + len(payload)) + header + payload)
        raw = _read_exact(self._sock, _LENGTH.size)
        (length,) = _LENGTH.unpack(raw)
        if length < _HEADER.size:
            raise ProtocolError(f"reply frame shorter than header: {length}")
        body = _read_exact(self._sock, length)
        rtype, rinstance, rseq = _HEADER.unpack_from(body)
        if rinstance != self.instance or rseq != self._seq:
            raise ProtocolError(
                f"reply addressed instance {rinstance} seq {rseq}, "
                f"expected {self.instance}/{self._seq}"
            )
        reply = body[_HEADER.size:]
        if rtype == MSG_ERROR:
            raise RemoteError(json.loads(reply.decode())["message"])
        return rtype, reply

    def _decode_result(self, payload: bytes, expect_step: bool) -> dict:
        if payload[0] != (1 if expect_step else 0):
            raise ProtocolError("result kind does not match the request")
        out: dict = {}
        off = 1
        if expect_step:
            reward, terminated, reason = struct.unpack_from("<dBB", payload, off)
            off += 10
            out["reward"] = reward
            out["terminated"] = bool(terminated)
            out["reason"] = self.manifest["reasons"][reason]
        n = self.observation["stacked_vector_size"]
        vec = np.frombuffer(payload, dtype=self.observation["vector_dtype"],
                            count=n, offset=off)
        off += vec.nbytes
        out["vector"] = vec.copy()
        shape = self.observation.get("image_shape")
        if shape:
            count = int(np.prod(shape))
            img = np.frombuffer(payload, dtype=self.observation["image_dtype"],
                                count=count, offset=off)
            off += img.nbytes
            out["image"] = img.reshape(tuple(shape)).copy()
        rest = payload[off:]
        out["info"] = json.loads(rest) if rest else {}
        return out

    def _encode_action(self, action) -> bytes:
        if self.action_space["kind"] == "continuous":
            arr = np.asarray(action, dtype=np.float64).reshape(-1)
            if arr.shape != (2,):
                raise ValueError("continuous action must have shape (2,)")
            return arr.tobytes()
        return struct.pack("<i", int(action))

    # -- episodic API -------------------------------------------------------

    def reset(self, seed: int) -> np.ndarray:
        mtype, payload = self._request(MSG_RESET, struct.pack("<Q", int(seed)))
        if mtype != MSG_RESULT:
            raise ProtocolError(f"expected result, got type {mtype}")
        self._terminated = False
        return self._decode_result(payload, expect_step=False)["vector"]

    def step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        if self._terminated:
            raise RuntimeError("step() on a terminated episode; reset first")
        mtype, payload = self._request(MSG_STEP, self._encode_action(action))
        if mtype != MSG_RESULT:
            raise ProtocolError(f"expected result, got type {mtype}")
        res = self._decode_result(payload, expect_step=True)
        self._terminated = res["terminated"]
        info = res["info"]
        info["reason"] = res["reason"]
        return res["vector"], res["reward"], res["terminated"], info

    def close(self) -> None:
        try:
            self._request(MSG_CLOSE, b"")
        finally:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect(address: str | tuple[str, int], config: dict | None = None,
            instance: int = 0) -> RemoteEnv:
    if isinstance(address, str):
        host, _, port = address.rpartition(":")
        address = (host or "127.0.0.1", int(port))
    return RemoteEnv(address, config=config, instance=instance)


class VectorEnv:
    """Client-side fan-out over k isolated instances on one server."""

    def __init__(self, address: str | tuple[str, int], k: int,
                 config: dict | None = None):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.envs = [connect(address, config=config, instance=i) for i in range(k)]
        manifests = {json.dumps(e.manifest, sort_keys=True) for e in self.envs}
        if len(manifests) != 1:
            raise ProtocolError("instances negotiated differing manifests")
        self.manifest = self.envs[0].manifest

    @property
    def k(self) -> int:
        return len(self.envs)

    def reset(self, seeds) -> np.ndarray:
        seeds = list(seeds)
        if len(seeds) != self.k:
            raise ValueError(f"need {self.k} seeds, got {len(seeds)}")
        if len(set(seeds)) != len(seeds):
            raise ValueError("instances must not share seeds")
        return np.stack([e.reset(s) for e, s in zip(self.envs, seeds)])

    def step(self, actions) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[dict]]:
        if len(actions) != self.k:
            raise ValueError(f"need {self.k} actions, got {len(actions)}")
        obs, rewards, dones, infos = [], [], [], []
        for i, (env, action) in enumerate(zip(self.envs, actions)):
            try:
                o, r, d, info = env.step(action)
            except Exception as exc:
                raise RuntimeError(f"instance {i} failed: {exc}") from exc
            obs.append(o)
            rewards.append(r)
            dones.append(d)
            infos.append(info)
        return (np.stack(obs), np.asarray(rewards, dtype=np.float64),
                np.asarray(dones, dtype=bool), infos)

    def close(self) -> None:
        for env in self.envs:
            env.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
