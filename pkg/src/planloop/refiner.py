"""LLM-driven plan refinement: prompt assembly, backends, versioned sessions.

A session starts from the vision-derived semantic plan and accumulates one
version per accepted refinement. Structurally or semantically invalid model
output is rejected before it enters history; logically wrong but valid output
reaches the user, who can rate it and restore the previous version.
"""
from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from importlib import resources

import yaml

from .btree import BehaviorTree, from_xml, to_xml
from .demo import ObjectModel
from .errors import BackendError, RepairError, SessionError
from .repair import validate_and_repair
from .semcodec import CodecConfig, Sidecar, decode_plan, encode_plan, semantic_labels_valid

RATINGS = ("satisfied", "quite_satisfied", "not_satisfied", "unrated")
STIFFNESS_NM = {"low": 1000.0, "medium": 1500.0, "high": 2000.0}

ENV_URL = "PLANLOOP_LLM_URL"
ENV_MODEL = "PLANLOOP_LLM_MODEL"
ENV_API_KEY = "PLANLOOP_LLM_API_KEY"


def load_guidelines() -> str:
    return resources.files("planloop.assets").joinpath("guidelines.md").read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# backends


class LLMBackend:
    """Behavior contract: complete(system, user) -> response text."""

    def complete(self, system: str, user: str) -> str:  # pragma: no cover - interface
        raise NotImplementedError


class HttpChatBackend(LLMBackend):
    """OpenAI-compatible chat-completion client. Temperature 0 for reproducibility."""

    def __init__(self, url: str, model: str, api_key: str = "", temperature: float = 0.0,
                 timeout: float = 60.0):
        self.url = url
        self.model = model
        self.api_key = api_key
        self.temperature = temperature
        self.timeout = timeout

    @classmethod
    def from_env(cls) -> "HttpChatBackend":
        url = os.environ.get(ENV_URL)
        model = os.environ.get(ENV_MODEL)
        if not url or not model:
            raise BackendError(f"set {ENV_URL} and {ENV_MODEL} to use the live backend")
        return cls(url=url, model=model, api_key=os.environ.get(ENV_API_KEY, ""))

    def complete(self, system: str, user: str) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.temperature,
        }
        try:
            response = httpx.post(self.url, json=payload, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            data = response.json()
            return str(data["choices"][0]["message"]["content"])
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise BackendError(f"chat completion failed: {exc}") from exc


class MockBackend(LLMBackend):
    """Deterministic scripted backend: first rule whose pattern matches the request wins.

    Script file (YAML or JSON): ``rules: [{pattern: <regex>, response: <xml>} |
    {pattern: ..., response_file: <path>}]``. Patterns match the latest user
    request, case-insensitively.
    """

    def __init__(self, rules: list[tuple[re.Pattern, str]]):
        self.rules = rules
        self.calls: list[tuple[str, str]] = []

    @classmethod
    def from_rules(cls, rules: list[dict]) -> "MockBackend":
        compiled = []
        for rule in rules:
            compiled.append((re.compile(rule["pattern"], re.IGNORECASE | re.DOTALL), rule["response"]))
        return cls(compiled)

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        with open(path, "r", encoding="utf-8") as fh:
            spec = yaml.safe_load(fh)
        rules = []
        base = os.path.dirname(os.fspath(path))
        for rule in spec["rules"]:
            if "response_file" in rule:
                with open(os.path.join(base, rule["response_file"]), "r", encoding="utf-8") as fh:
                    response = fh.read()
            else:
                response = rule["response"]
            rules.append({"pattern": rule["pattern"], "response": response})
        return cls.from_rules(rules)

    def complete(self, system: str, user: str) -> str:
        self.calls.append((system, user))
        request = user.rsplit("Request:", 1)[-1] if "Request:" in user else user
        for pattern, response in self.rules:
            if pattern.search(request):
                return response
        raise BackendError(f"mock backend has no rule matching {request.strip()[:80]!r}")


class ReplayBackend(LLMBackend):
    """Replays recorded (system, user) -> response pairs; exact prompt match required."""

    def __init__(self, transcript: dict[tuple[str, str], str]):
        self.transcript = transcript

    @classmethod
    def from_file(cls, path) -> "ReplayBackend":
        transcript = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    transcript[(row["system"], row["user"])] = row["response"]
        return cls(transcript)

    def complete(self, system: str, user: str) -> str:
        try:
            return self.transcript[(system, user)]
        except KeyError:
            raise BackendError("no recorded response for this prompt") from None


class TranscriptRecorder(LLMBackend):
    """Wraps a backend, appending (prompt, response) pairs to a JSONL file."""

    def __init__(self, inner: LLMBackend, path):
        self.inner = inner
        self.path = path

    def complete(self, system: str, user: str) -> str:
        response = self.inner.complete(system, user)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"system": system, "user": user, "response": response}) + "\n")
        return response


# ---------------------------------------------------------------------------
# sessions


@dataclass
class PlanVersion:
    tree: BehaviorTree
    request: str
    raw_output: str
    repair_log: list[str] = field(default_factory=list)
    rating: str = "unrated"


@dataclass
class RefinementSession:
    object_labels: list[str]
    obkg_model: ObjectModel
    codec: CodecConfig
    sidecar: Sidecar
    guidelines: str
    versions: list[PlanVersion] = field(default_factory=list)
    discarded: list[PlanVersion] = field(default_factory=list)
    _refine_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def iteration(self) -> int:
        return len(self.versions) - 1

    @property
    def current(self) -> PlanVersion:
        return self.versions[-1]


def start_session(
    exe_bt0: BehaviorTree,
    obkg_model: ObjectModel,
    codec: CodecConfig | None = None,
    guidelines: str | None = None,
) -> RefinementSession:
    """Encode the vision-based plan and open a session at version 0."""
    codec = codec or CodecConfig()
    sem0, sidecar = encode_plan(exe_bt0, obkg_model, codec)
    return RefinementSession(
        object_labels=list(obkg_model.labels),
        obkg_model=obkg_model,
        codec=codec,
        sidecar=sidecar,
        guidelines=guidelines if guidelines is not None else load_guidelines(),
        versions=[PlanVersion(tree=sem0, request="", raw_output="")],
    )


def build_prompt(session: RefinementSession, request: str) -> tuple[str, str]:
    """(system, user): static guidelines + labels; latest plan + verbatim request."""
    if not request.strip():
        raise SessionError("empty refinement request")
    system = (
        session.guidelines
        + "\nInteraction points of the reference object: "
        + ", ".join(session.object_labels)
        + "\n"
    )
    user = (
        "Current plan:\n"
        + to_xml(session.current.tree)
        + "\n\nRequest: "
        + request
    )
    return system, user


def refine(session: RefinementSession, request: str, backend: LLMBackend) -> PlanVersion:
    """One refinement iteration; appends and returns the new version.

    Irreparable or invalid output raises without touching history. Transport
    failures raise BackendError (retriable).
    """
    if not session._refine_lock.acquire(blocking=False):
        raise SessionError("a refinement is already in flight for this session")
    try:
        system, user = build_prompt(session, request)
        raw = backend.complete(system, user)
        tree, repair_log = validate_and_repair(raw, "semantic")
        missing = semantic_labels_valid(tree, session.obkg_model)
        if missing:
            raise RepairError(
                f"output names unknown interaction point(s): {', '.join(missing)}; "
                f"valid labels: {', '.join(session.object_labels)}",
                raw_text=raw,
            )
        version = PlanVersion(tree=tree, request=request, raw_output=raw, repair_log=repair_log)
        session.versions.append(version)
        return version
    finally:
        session._refine_lock.release()


def restore(session: RefinementSession) -> PlanVersion:
    """Discard the latest version (kept in an audit trail); returns the new current."""
    if session.iteration < 1:
        raise SessionError("nothing to restore: already at version 0")
    session.discarded.append(session.versions.pop())
    return session.current


def rate(session: RefinementSession, version: int, rating: str) -> None:
    if rating not in RATINGS:
        raise SessionError(f"rating must be one of {RATINGS}")
    if version < 1:
        raise SessionError("version 0 has no request to rate")
    if version > session.iteration:
        raise SessionError(f"no version {version} (latest is {session.iteration})")
    session.versions[version].rating = rating


def satisfaction_report(session: RefinementSession) -> list[dict]:
    """Per-request rating rows, one bar per request in the style of a user study plot."""
    return [
        {"version": j, "request": v.request, "rating": v.rating}
        for j, v in enumerate(session.versions)
        if j >= 1
    ]


def finalize(session: RefinementSession) -> tuple[BehaviorTree, dict]:
    """Decode the current plan to an executable tree plus execution metadata."""
    exe, notes = decode_plan(session.current.tree, session.obkg_model, session.codec, session.sidecar)
    from .btree import exec_nodes

    stiffness = {
        "/".join(map(str, path)) or "root": STIFFNESS_NM[node.stiffness]
        for path, node in exec_nodes(exe)
    }
    metadata = {"stiffness_nm": stiffness, "decode_notes": notes, "iteration": session.iteration}
    return exe, metadata


def session_to_dict(session: RefinementSession) -> dict:
    return {
        "object_labels": session.object_labels,
        "codec": {"z_th": session.codec.z_th, "z_above": session.codec.z_above,
                  "z_below": session.codec.z_below, "eps_z": session.codec.eps_z},
        "model": {
            "name": session.obkg_model.name,
            "interaction_points": [
                {"label": lab, "offset": [float(v) for v in off]}
                for lab, off in session.obkg_model.interaction_points
            ],
        },
        "sidecar": [
            {
                "path": list(path),
                "index": index,
                "desc": entry.desc,
                "p": [float(v) for v in entry.transform.translation],
                "q": [float(v) for v in entry.transform.quaternion()],
            }
            for (path, index), entry in session.sidecar.items()
        ],
        "guidelines": session.guidelines,
        "versions": [
            {"xml": to_xml(v.tree), "request": v.request, "raw_output": v.raw_output,
             "repair_log": v.repair_log, "rating": v.rating}
            for v in session.versions
        ],
        "discarded": [
            {"xml": to_xml(v.tree), "request": v.request, "raw_output": v.raw_output,
             "repair_log": v.repair_log, "rating": v.rating}
            for v in session.discarded
        ],
    }


def session_from_dict(data: dict) -> RefinementSession:
    import numpy as np

    from .semcodec import SidecarEntry
    from .transforms import RigidTransform

    model = ObjectModel(
        data["model"]["name"],
        tuple((ip["label"], np.asarray(ip["offset"])) for ip in data["model"]["interaction_points"]),
    )
    sidecar: Sidecar = {}
    for row in data["sidecar"]:
        key = (tuple(row["path"]), int(row["index"]))
        sidecar[key] = SidecarEntry(
            desc=row["desc"],
            transform=RigidTransform.from_quaternion(row["q"], row["p"]),
        )

    def versions(rows):
        return [
            PlanVersion(tree=from_xml(r["xml"]), request=r["request"], raw_output=r["raw_output"],
                        repair_log=list(r["repair_log"]), rating=r["rating"])
            for r in rows
        ]

    return RefinementSession(
        object_labels=list(data["object_labels"]),
        obkg_model=model,
        codec=CodecConfig(**data["codec"]),
        sidecar=sidecar,
        guidelines=data["guidelines"],
        versions=versions(data["versions"]),
        discarded=versions(data["discarded"]),
    )
