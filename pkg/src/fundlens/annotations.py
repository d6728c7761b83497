"""Image annotation providers and the scene-feature operations built on them.

Three providers share one interface: ``google`` and ``azure`` call the
respective vision APIs over HTTP (credentials come from the environment,
never from config files); ``fixture`` reads a local JSON map keyed by image
content hash and never touches the network, which keeps tests and the bundled
mini dataset fully offline.

Results are cached on disk by SHA-256 of the image bytes under
``cache/annotations/<provider>/<hash>.json``; a cache hit never re-invokes
the provider.  Rate limits are retried with exponential backoff (base 1 s,
factor 2, up to 5 attempts) before surfacing as a typed error.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    AnnotationAuthError,
    AnnotationNetworkError,
    AnnotationRateLimitError,
    ConfigError,
)

GOOGLE_KEY_ENV = "VISION_KEY_GOOGLE"
AZURE_KEY_ENV = "VISION_KEY_AZURE"
AZURE_ENDPOINT_ENV = "VISION_ENDPOINT_AZURE"

DEFAULT_CONFIDENCE_THRESHOLD = 0.5

RETRY_BASE_SECONDS = 1.0
RETRY_FACTOR = 2.0
RETRY_MAX_TRIES = 5


@dataclass(frozen=True)
class AnnotationSet:
    provider: str
    labels: tuple[tuple[str, float], ...]  # (label, confidence in [0,1])
    image_key: str  # hex SHA-256 of the image bytes
    unannotated: bool = field(default=False)

    def __post_init__(self):
        for label, conf in self.labels:
            if not (0.0 <= conf <= 1.0):
                raise ValueError(f"confidence {conf} for '{label}' outside [0,1]")

    def to_json(self) -> dict:
        return {
            "provider": self.provider,
            "image_key": self.image_key,
            "unannotated": self.unannotated,
            "labels": [{"label": l, "confidence": c} for l, c in self.labels],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotationSet":
        return cls(
            provider=obj["provider"],
            labels=tuple((d["label"], float(d["confidence"])) for d in obj["labels"]),
            image_key=obj["image_key"],
            unannotated=bool(obj.get("unannotated", False)),
        )


def image_key(image_bytes: bytes) -> str:
    return hashlib.sha256(image_bytes).hexdigest()


def _http_post(url: str, headers: dict, body: bytes, timeout: float = 30.0):
    """Default transport: returns (status, response bytes)."""
    req = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        raise AnnotationNetworkError(f"POST {url} failed: {exc}") from exc


class FixtureProvider:
    """Reads annotations from a JSON file mapping content hash -> labels."""

    name = "fixture"

    def __init__(self, fixture_path):
        path = Path(fixture_path)
        if not path.is_file():
            raise ConfigError(f"fixture annotation file not found: {path}")
        self._map = json.loads(path.read_text())

    def annotate(self, image_bytes: bytes) -> AnnotationSet:
        key = image_key(image_bytes)
        entries = self._map.get(key)
        if entries is None:
            return AnnotationSet(provider=self.name, labels=(), image_key=key,
                                 unannotated=True)
        labels = tuple((e["label"], float(e["confidence"])) for e in entries)
        return AnnotationSet(provider=self.name, labels=labels, image_key=key)


class _HttpProvider:
    """Shared retry/backoff plumbing for the HTTP providers."""

    name = "http"

    def __init__(self, post_fn=_http_post, sleep_fn=time.sleep):
        self._post = post_fn
        self._sleep = sleep_fn

    def _request(self) -> tuple[str, dict, bytes]:
        raise NotImplementedError

    def _parse(self, body: bytes) -> tuple[tuple[str, float], ...]:
        raise NotImplementedError

    def annotate(self, image_bytes: bytes) -> AnnotationSet:
        key = image_key(image_bytes)
        delay = RETRY_BASE_SECONDS
        for attempt in range(RETRY_MAX_TRIES):
            url, headers, body = self._build(image_bytes)
            status, payload = self._post(url, headers, body)
            if status == 429:
                if attempt + 1 < RETRY_MAX_TRIES:
                    self._sleep(delay)
                    delay *= RETRY_FACTOR
                    continue
                raise AnnotationRateLimitError(
                    f"{self.name}: rate limited after {RETRY_MAX_TRIES} attempts"
                )
            if status in (401, 403):
                raise AnnotationAuthError(f"{self.name}: HTTP {status}")
            if status != 200:
                raise AnnotationNetworkError(f"{self.name}: HTTP {status}")
            return AnnotationSet(
                provider=self.name, labels=self._parse(payload), image_key=key
            )
        raise AnnotationRateLimitError(f"{self.name}: retries exhausted")

    def _build(self, image_bytes: bytes) -> tuple[str, dict, bytes]:
        raise NotImplementedError


class GoogleVisionProvider(_HttpProvider):
    name = "google"
    url = "https://vision.googleapis.com/v1/images:annotate"

    def __init__(self, api_key: str | None = None, **kw):
        super().__init__(**kw)
        self._key = api_key or os.environ.get(GOOGLE_KEY_ENV)
        if not self._key:
            raise ConfigError(f"set {GOOGLE_KEY_ENV} to use the google provider")

    def _build(self, image_bytes: bytes):
        payload = {
            "requests": [
                {
                    "image": {"content": base64.b64encode(image_bytes).decode()},
                    "features": [{"type": "LABEL_DETECTION", "maxResults": 50}],
                }
            ]
        }
        return (
            f"{self.url}?key={self._key}",
            {"Content-Type": "application/json"},
            json.dumps(payload).encode(),
        )

    def _parse(self, body: bytes):
        obj = json.loads(body)
        anns = obj.get("responses", [{}])[0].get("labelAnnotations", [])
        return tuple(
            (a["description"], min(max(float(a.get("score", 0.0)), 0.0), 1.0))
            for a in anns
        )


class AzureVisionProvider(_HttpProvider):
    name = "azure"

    def __init__(self, api_key: str | None = None, endpoint: str | None = None, **kw):
        super().__init__(**kw)
        self._key = api_key or os.environ.get(AZURE_KEY_ENV)
        if not self._key:
            raise ConfigError(f"set {AZURE_KEY_ENV} to use the azure provider")
        self._endpoint = (
            endpoint
            or os.environ.get(AZURE_ENDPOINT_ENV)
            or "https://westus.api.cognitive.microsoft.com"
        ).rstrip("/")

    def _build(self, image_bytes: bytes):
        url = f"{self._endpoint}/vision/v3.2/tag"
        headers = {
            "Ocp-Apim-Subscription-Key": self._key,
            "Content-Type": "application/octet-stream",
        }
        return url, headers, image_bytes

    def _parse(self, body: bytes):
        obj = json.loads(body)
        return tuple(
            (t["name"], min(max(float(t.get("confidence", 0.0)), 0.0), 1.0))
            for t in obj.get("tags", [])
        )


class AnnotationCache:
    """Disk cache: cache/annotations/<provider>/<hash>.json. Thread-safe."""

    def __init__(self, root):
        self.root = Path(root)
        self._lock = threading.Lock()
        self.provider_calls = 0  # test hook: counts actual provider invocations

    def annotate(self, provider, image_bytes: bytes) -> AnnotationSet:
        key = image_key(image_bytes)
        path = self.root / "annotations" / provider.name / f"{key}.json"
        with self._lock:
            if path.is_file():
                return AnnotationSet.from_json(json.loads(path.read_text()))
        result = provider.annotate(image_bytes)
        with self._lock:
            self.provider_calls += 1
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(result.to_json(), sort_keys=True))
            tmp.replace(path)
        return result


def annotate_image(image_bytes: bytes, provider, cache: AnnotationCache | None = None):
    """Annotate raw image bytes, optionally through a cache."""
    if cache is not None:
        return cache.annotate(provider, image_bytes)
    return provider.annotate(image_bytes)


def num_evoked_concepts(ann: AnnotationSet,
                        tau: float = DEFAULT_CONFIDENCE_THRESHOLD) -> int:
    """Count of labels with confidence >= tau."""
    return sum(1 for _, c in ann.labels if c >= tau)


def ease_of_concept_identification(ann: AnnotationSet) -> float | None:
    """Maximum confidence over all labels (no threshold); None if empty."""
    if not ann.labels:
        return None
    return max(c for _, c in ann.labels)
