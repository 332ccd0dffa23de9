"""News retrieval for the search policy.

Searches go through an injectable transport so tests can prove fixture
mode never touches the network.  Live mode speaks the common aggregator
wire shape (GET ``{endpoint}/everything`` with an ``X-Api-Key`` header),
fixture mode replays a JSON map from query string to response object,
and a small file cache keyed by query+config hash keeps repeated
lookups offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time as _time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Sequence
from urllib.parse import urlencode, urlparse

from .querygen import SearchQuery

log = logging.getLogger(__name__)

LIVE = "live"
FIXTURE = "fixture"

DEFAULT_API_KEY_ENV = "NEWS_API_KEY"
DEFAULT_PAGE_SIZE = 10
DEFAULT_TIMEOUT_MS = 10_000
DEFAULT_RATE_LIMIT = 60  # requests per minute
DEFAULT_CACHE_TTL = 6 * 3600.0
MAX_SOURCES_PER_REQUEST = 20

# transport(url, headers, timeout_seconds) -> (status_code, body_bytes)
Transport = Callable[[str, dict, float], tuple[int, bytes]]


class AuthError(RuntimeError):
    """API key missing from the environment or rejected upstream."""


class TransportError(RuntimeError):
    """Connection failure, timeout, or non-2xx response."""

    def __init__(self, source: str, status: Optional[int], detail: str):
        super().__init__(f"{source}: {detail} (status={status})")
        self.source = source
        self.status = status


class RateLimited(RuntimeError):
    """Upstream returned 429; carries the advised retry delay."""

    def __init__(self, retry_after: float):
        super().__init__(f"rate limited, retry after {retry_after}s")
        self.retry_after = retry_after


@dataclass
class NewsSourceConfig:
    mode: str = FIXTURE
    endpoint: str = ""
    api_key_env: str = DEFAULT_API_KEY_ENV
    sources: tuple[str, ...] = ()
    page_size: int = DEFAULT_PAGE_SIZE
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    rate_limit: int = DEFAULT_RATE_LIMIT
    fixture_path: Optional[str] = None
    cache_dir: Optional[str] = None
    allow_stale: bool = False

    def __post_init__(self) -> None:
        if self.mode not in (LIVE, FIXTURE):
            raise ValueError("mode must be 'live' or 'fixture'")
        if self.mode == FIXTURE and not self.fixture_path:
            raise ValueError("fixture mode requires fixture_path")
        if self.mode == LIVE and (not self.endpoint or not self.api_key_env):
            raise ValueError("live mode requires endpoint and api_key_env")
        self.sources = tuple(self.sources)

    def fingerprint(self) -> str:
        """Stable hash of the fields that change what a search returns."""
        key = json.dumps(
            [self.mode, self.endpoint, sorted(self.sources), self.page_size,
             self.fixture_path],
            sort_keys=True,
        )
        return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Article:
    source: str
    title: str
    description: str
    content: str
    url: str
    published_at: datetime

    def to_dict(self) -> dict:
        return {
            "source": {"name": self.source},
            "title": self.title,
            "description": self.description,
            "content": self.content,
            "url": self.url,
            "publishedAt": self.published_at.isoformat().replace("+00:00", "Z"),
        }


@dataclass
class SearchResult:
    query: SearchQuery
    articles: list[Article]
    fetched_at: datetime
    from_cache: bool = False
    source_errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _parse_timestamp(raw: str) -> datetime:
    if not raw:
        return datetime.fromtimestamp(0, tz=timezone.utc)
    try:
        dt = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        return datetime.fromtimestamp(0, tz=timezone.utc)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _valid_url(url: str) -> bool:
    parsed = urlparse(url)
    return bool(parsed.scheme and parsed.netloc)


def parse_articles(response: dict) -> list[Article]:
    """Extract well-formed articles from an aggregator response object.

    Entries without a title or a syntactically valid URL are dropped:
    the policy only forwards correctly formatted contents.
    """
    articles = []
    for entry in response.get("articles", []):
        title = (entry.get("title") or "").strip()
        url = (entry.get("url") or "").strip()
        if not title or not _valid_url(url):
            continue
        source = entry.get("source") or {}
        articles.append(Article(
            source=(source.get("name") or "").strip() if isinstance(source, dict) else str(source),
            title=title,
            description=(entry.get("description") or "").strip(),
            content=(entry.get("content") or "").strip(),
            url=url,
            published_at=_parse_timestamp(entry.get("publishedAt") or ""),
        ))
    return articles


def _order_articles(articles: list[Article]) -> list[Article]:
    return sorted(articles, key=lambda a: (-a.published_at.timestamp(), a.source, a.title))


class _RateLimiter:
    """Blocks when more than ``per_minute`` requests land in a minute."""

    def __init__(self, per_minute: int, time_fn=_time.monotonic, sleep_fn=_time.sleep):
        self.per_minute = max(1, per_minute)
        self._time = time_fn
        self._sleep = sleep_fn
        self._stamps: list[float] = []

    def wait(self) -> None:
        now = self._time()
        self._stamps = [t for t in self._stamps if now - t < 60.0]
        if len(self._stamps) >= self.per_minute:
            self._sleep(60.0 - (now - self._stamps[0]))
        self._stamps.append(self._time())


def default_transport(url: str, headers: dict, timeout: float) -> tuple[int, bytes]:
    """Plain stdlib HTTP GET; only imported-at-call so offline paths never touch it."""
    import urllib.error
    import urllib.request

    request = urllib.request.Request(url, headers=headers)
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return response.status, response.read()
    except urllib.error.HTTPError as err:
        return err.code, err.read()


def search(
    query: SearchQuery,
    config: NewsSourceConfig,
    transport: Optional[Transport] = None,
    now: Optional[datetime] = None,
    env: Optional[dict] = None,
) -> SearchResult:
    """Run the search policy's retrieval step.

    Fixture mode replays the fixture entry keyed by ``query.raw`` (no
    entry means an empty result, never an error, and no network use).
    Live mode issues one request per batch of configured sources and
    degrades gracefully: per-batch failures are collected and only a
    total failure raises.
    """
    if not query.terms:
        raise ValueError("query has no terms")
    fetched_at = now or datetime.now(timezone.utc)

    if config.mode == FIXTURE:
        fixtures = json.loads(Path(config.fixture_path).read_text("utf-8"))
        response = fixtures.get(query.raw, {"status": "ok", "articles": []})
        return SearchResult(
            query=query,
            articles=_order_articles(parse_articles(response)),
            fetched_at=fetched_at,
        )

    import os
    environment = env if env is not None else os.environ
    api_key = environment.get(config.api_key_env)
    if not api_key:
        raise AuthError(f"environment variable {config.api_key_env} is not set")

    transport = transport or default_transport
    limiter = _RateLimiter(config.rate_limit)
    batches: list[tuple[str, ...]] = (
        [tuple(config.sources[i:i + MAX_SOURCES_PER_REQUEST])
         for i in range(0, len(config.sources), MAX_SOURCES_PER_REQUEST)]
        or [()]
    )

    articles: list[Article] = []
    errors: list[str] = []
    first_error: Optional[Exception] = None
    succeeded = False
    for batch in batches:
        params = {"q": query.raw, "pageSize": str(config.page_size)}
        if batch:
            params["sources"] = ",".join(batch)
        url = f"{config.endpoint.rstrip('/')}/everything?{urlencode(params)}"
        label = ",".join(batch) or "all-sources"
        try:
            limiter.wait()
            status, body = transport(url, {"X-Api-Key": api_key}, config.timeout_ms / 1000.0)
            if status == 401 or status == 403:
                raise AuthError(f"{label}: key rejected (status={status})")
            if status == 429:
                raise RateLimited(_retry_after(body))
            if not 200 <= status < 300:
                raise TransportError(label, status, "non-2xx response")
            articles.extend(parse_articles(json.loads(body.decode("utf-8"))))
            succeeded = True
        except (AuthError, RateLimited, TransportError) as err:
            errors.append(str(err))
            first_error = first_error or err
        except OSError as err:
            wrapped = TransportError(label, None, str(err))
            errors.append(str(wrapped))
            first_error = first_error or wrapped
    if not succeeded and first_error is not None:
        raise first_error
    return SearchResult(
        query=query,
        articles=_order_articles(articles),
        fetched_at=fetched_at,
        source_errors=errors,
    )


def _retry_after(body: bytes) -> float:
    try:
        return float(json.loads(body.decode("utf-8")).get("retryAfter", 60.0))
    except (ValueError, AttributeError):
        return 60.0


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------

def _cache_path(query: SearchQuery, config: NewsSourceConfig) -> Path:
    if not config.cache_dir:
        raise ValueError("caching requires config.cache_dir")
    digest = hashlib.sha256(
        (query.raw + "\x00" + config.fingerprint()).encode("utf-8")
    ).hexdigest()
    return Path(config.cache_dir) / f"{digest}.json"


def _serialize_result(result: SearchResult) -> dict:
    return {
        "query": result.query.raw,
        "fetched_at": result.fetched_at.isoformat(),
        "articles": [a.to_dict() for a in result.articles],
    }


def _deserialize_result(query: SearchQuery, payload: dict) -> SearchResult:
    return SearchResult(
        query=query,
        articles=_order_articles(parse_articles(payload)),
        fetched_at=datetime.fromisoformat(payload["fetched_at"]),
        from_cache=True,
    )


def cached(
    query: SearchQuery,
    config: NewsSourceConfig,
    ttl: float = DEFAULT_CACHE_TTL,
    transport: Optional[Transport] = None,
    now: Optional[datetime] = None,
    env: Optional[dict] = None,
) -> SearchResult:
    """Search with a file cache: serve entries younger than ``ttl`` seconds,
    refresh otherwise.  With ``allow_stale`` set, a failed refresh falls
    back to the stale entry plus a warning instead of raising."""
    if ttl < 0:
        raise ValueError("ttl must be >= 0")
    current = now or datetime.now(timezone.utc)
    path = _cache_path(query, config)
    entry = None
    if path.exists():
        entry = json.loads(path.read_text("utf-8"))
        age = (current - datetime.fromisoformat(entry["fetched_at"])).total_seconds()
        if age <= ttl:
            return _deserialize_result(query, entry)
    try:
        result = search(query, config, transport=transport, now=current, env=env)
    except (AuthError, RateLimited, TransportError):
        if entry is not None and config.allow_stale:
            stale = _deserialize_result(query, entry)
            stale.warnings.append("refresh failed; serving stale cache entry")
            log.warning("news cache: refresh failed for %r, serving stale entry", query.raw)
            return stale
        raise
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(_serialize_result(result)), encoding="utf-8")
    tmp.replace(path)
    return result


def aggregate_content(articles: Sequence[Article], token_budget: int) -> str:
    """Join per-article "title. description." snippets and cap the token count.

    Articles are consumed in result order, separated by " | ", and the
    output never exceeds ``token_budget`` whitespace-separated tokens.
    """
    if token_budget < 0:
        raise ValueError("token_budget must be >= 0")
    pieces = []
    for article in articles:
        snippet = f"{article.title}."
        if article.description:
            snippet += f" {article.description}."
        pieces.append(snippet)
    joined = " | ".join(pieces)
    tokens = joined.split()
    if len(tokens) <= token_budget:
        return joined
    return " ".join(tokens[:token_budget])
