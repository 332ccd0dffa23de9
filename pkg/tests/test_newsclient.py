import json
from datetime import datetime, timezone

import pytest

from mpsc.newsclient import (
    Article,
    AuthError,
    NewsSourceConfig,
    RateLimited,
    SearchResult,
    TransportError,
    _RateLimiter,
    aggregate_content,
    cached,
    parse_articles,
    search,
)
from mpsc.querygen import QueryOrigin, SearchQuery


def _query(raw="climate bill"):
    return SearchQuery(terms=tuple(raw.split()), raw=raw, origin=QueryOrigin.KEYWORDS)


def _article(title, source="src", published="2023-05-01T12:00:00Z", description="desc"):
    return {
        "source": {"name": source},
        "title": title,
        "description": description,
        "content": "content",
        "url": "https://example.com/" + title.replace(" ", "-"),
        "publishedAt": published,
    }


def forbidden_transport(url, headers, timeout):
    raise AssertionError(f"network transport invoked: {url}")


@pytest.fixture
def fixture_config(tmp_path):
    fixture = {
        "climate bill": {
            "status": "ok",
            "articles": [
                _article("Old news", published="2023-01-01T00:00:00Z"),
                _article("New news", published="2023-06-01T00:00:00Z"),
            ],
        }
    }
    path = tmp_path / "fixtures.json"
    path.write_text(json.dumps(fixture), encoding="utf-8")
    return NewsSourceConfig(mode="fixture", fixture_path=str(path),
                            cache_dir=str(tmp_path / "cache"))


class TestFixtureMode:
    def test_returns_fixture_articles(self, fixture_config):
        result = search(_query(), fixture_config, transport=forbidden_transport)
        assert [a.title for a in result.articles] == ["New news", "Old news"]
        assert not result.from_cache

    def test_unknown_query_empty_no_error(self, fixture_config):
        result = search(_query("unknown query"), fixture_config,
                        transport=forbidden_transport)
        assert result.articles == []

    def test_no_network_activity(self, fixture_config):
        # forbidden_transport raises if ever called; both paths must avoid it.
        search(_query(), fixture_config, transport=forbidden_transport)
        cached(_query(), fixture_config, ttl=60, transport=forbidden_transport)

    def test_requires_fixture_path(self):
        with pytest.raises(ValueError):
            NewsSourceConfig(mode="fixture")


class TestArticleParsing:
    def test_drops_malformed_entries(self):
        response = {
            "articles": [
                _article("Good one"),
                {"title": "", "url": "https://example.com/x"},
                {"title": "No url", "url": "not-a-url"},
            ]
        }
        articles = parse_articles(response)
        assert [a.title for a in articles] == ["Good one"]

    def test_bad_timestamp_defaults_to_epoch(self):
        articles = parse_articles({"articles": [_article("A", published="garbage")]})
        assert articles[0].published_at == datetime.fromtimestamp(0, tz=timezone.utc)

    def test_ordering_total_and_deterministic(self):
        same_time = "2023-05-01T00:00:00Z"
        response = {"articles": [
            _article("B title", source="zeta", published=same_time),
            _article("A title", source="zeta", published=same_time),
            _article("C title", source="alpha", published=same_time),
            _article("Newest", source="omega", published="2024-01-01T00:00:00Z"),
        ]}
        result = SearchResult(
            query=_query(), articles=[], fetched_at=datetime.now(timezone.utc),
        )
        from mpsc.newsclient import _order_articles

        ordered = _order_articles(parse_articles(response))
        assert [a.title for a in ordered] == ["Newest", "C title", "A title", "B title"]
        assert result.articles == []


class TestLiveMode:
    def _config(self):
        return NewsSourceConfig(
            mode="live", endpoint="https://api.example.com/v2",
            sources=("alpha", "beta"), page_size=5,
        )

    def test_missing_key_raises_before_network(self):
        calls = []

        def transport(url, headers, timeout):
            calls.append(url)
            return 200, b"{}"

        with pytest.raises(AuthError):
            search(_query(), self._config(), transport=transport, env={})
        assert calls == []

    def test_request_shape(self):
        seen = {}

        def transport(url, headers, timeout):
            seen["url"] = url
            seen["headers"] = headers
            return 200, json.dumps({"status": "ok", "articles": [_article("T")]}).encode()

        result = search(_query(), self._config(), transport=transport,
                        env={"NEWS_API_KEY": "k123"})
        assert "/everything?" in seen["url"]
        assert "q=climate+bill" in seen["url"]
        assert "pageSize=5" in seen["url"]
        assert "sources=alpha%2Cbeta" in seen["url"]
        assert seen["headers"] == {"X-Api-Key": "k123"}
        assert len(result.articles) == 1

    def test_rejected_key(self):
        def transport(url, headers, timeout):
            return 401, b"{}"

        with pytest.raises(AuthError):
            search(_query(), self._config(), transport=transport,
                   env={"NEWS_API_KEY": "bad"})

    def test_rate_limited_carries_retry_after(self):
        def transport(url, headers, timeout):
            return 429, json.dumps({"retryAfter": 12}).encode()

        with pytest.raises(RateLimited) as err:
            search(_query(), self._config(), transport=transport,
                   env={"NEWS_API_KEY": "k"})
        assert err.value.retry_after == 12

    def test_non_2xx_raises_transport_error(self):
        def transport(url, headers, timeout):
            return 500, b"oops"

        with pytest.raises(TransportError) as err:
            search(_query(), self._config(), transport=transport,
                   env={"NEWS_API_KEY": "k"})
        assert err.value.status == 500

    def test_partial_batch_failure_degrades_gracefully(self):
        many_sources = tuple(f"s{i}" for i in range(25))  # two batches of <=20
        config = NewsSourceConfig(mode="live", endpoint="https://api.example.com",
                                  sources=many_sources)
        calls = []

        def transport(url, headers, timeout):
            calls.append(url)
            if len(calls) == 1:
                return 503, b"down"
            return 200, json.dumps({"status": "ok", "articles": [_article("OK")]}).encode()

        result = search(_query(), config, transport=transport, env={"NEWS_API_KEY": "k"})
        assert len(calls) == 2
        assert [a.title for a in result.articles] == ["OK"]
        assert len(result.source_errors) == 1


class TestRateLimiter:
    def test_sleeps_when_budget_exhausted(self):
        clock = {"now": 0.0}
        sleeps = []

        def time_fn():
            return clock["now"]

        def sleep_fn(seconds):
            sleeps.append(seconds)
            clock["now"] += seconds

        limiter = _RateLimiter(per_minute=2, time_fn=time_fn, sleep_fn=sleep_fn)
        limiter.wait()
        limiter.wait()
        assert sleeps == []
        limiter.wait()
        assert len(sleeps) == 1 and sleeps[0] == pytest.approx(60.0)


class TestCache:
    def test_hit_within_ttl(self, fixture_config):
        first = cached(_query(), fixture_config, ttl=3600)
        second = cached(_query(), fixture_config, ttl=3600)
        assert not first.from_cache
        assert second.from_cache
        assert [a.title for a in second.articles] == [a.title for a in first.articles]

    def test_ttl_zero_always_delegates(self, fixture_config):
        cached(_query(), fixture_config, ttl=0)
        second = cached(_query(), fixture_config, ttl=0)
        assert not second.from_cache

    def test_stale_fallback_on_live_failure(self, tmp_path):
        config = NewsSourceConfig(
            mode="live", endpoint="https://api.example.com", sources=("a",),
            cache_dir=str(tmp_path / "cache"), allow_stale=True,
        )

        def good(url, headers, timeout):
            return 200, json.dumps({"status": "ok", "articles": [_article("First")]}).encode()

        def bad(url, headers, timeout):
            return 500, b"down"

        env = {"NEWS_API_KEY": "k"}
        t0 = datetime(2023, 1, 1, tzinfo=timezone.utc)
        t1 = datetime(2023, 1, 2, tzinfo=timezone.utc)
        first = cached(_query(), config, ttl=60, transport=good, now=t0, env=env)
        assert [a.title for a in first.articles] == ["First"]
        stale = cached(_query(), config, ttl=60, transport=bad, now=t1, env=env)
        assert stale.from_cache
        assert stale.warnings
        assert [a.title for a in stale.articles] == ["First"]

    def test_failure_without_stale_flag_raises(self, tmp_path):
        config = NewsSourceConfig(
            mode="live", endpoint="https://api.example.com", sources=("a",),
            cache_dir=str(tmp_path / "cache"), allow_stale=False,
        )

        def bad(url, headers, timeout):
            return 500, b"down"

        with pytest.raises(TransportError):
            cached(_query(), config, ttl=60, transport=bad, env={"NEWS_API_KEY": "k"})

    def test_negative_ttl_rejected(self, fixture_config):
        with pytest.raises(ValueError):
            cached(_query(), fixture_config, ttl=-1)


class TestAggregateContent:
    def _articles(self):
        return [
            Article(source="s", title="Alpha beta", description="gamma delta epsilon",
                    content="", url="https://e.com/1",
                    published_at=datetime(2023, 1, 2, tzinfo=timezone.utc)),
            Article(source="s", title="Zeta eta", description="theta iota",
                    content="", url="https://e.com/2",
                    published_at=datetime(2023, 1, 1, tzinfo=timezone.utc)),
        ]

    def test_empty_list(self):
        assert aggregate_content([], 100) == ""

    def test_single_article_large_budget(self):
        articles = [Article(source="s", title="title", description="description",
                            content="", url="https://e.com/x",
                            published_at=datetime(2023, 1, 1, tzinfo=timezone.utc))]
        assert aggregate_content(articles, 100) == "title. description."

    def test_untruncated_join(self):
        text = aggregate_content(self._articles(), 100)
        assert text == "Alpha beta. gamma delta epsilon. | Zeta eta. theta iota."

    def test_truncation_at_exact_budget(self):
        # Full join has 11 whitespace tokens; budget 7 cuts mid second article.
        text = aggregate_content(self._articles(), 7)
        assert text == "Alpha beta. gamma delta epsilon. | Zeta"
        assert len(text.split()) == 7

    def test_three_articles_budget_covers_one_and_a_half(self):
        articles = self._articles() + [
            Article(source="s", title="Third one", description="more words",
                    content="", url="https://e.com/3",
                    published_at=datetime(2022, 1, 1, tzinfo=timezone.utc)),
        ]
        # Article snippets are 5, 4, and 4 tokens plus " | " separators;
        # budget 8 lands inside the second article.
        text = aggregate_content(articles, 8)
        assert text == "Alpha beta. gamma delta epsilon. | Zeta eta."
        assert len(text.split()) == 8

    def test_budget_zero(self):
        assert aggregate_content(self._articles(), 0) == ""

    def test_budget_never_exceeded(self):
        for budget in range(0, 15):
            assert len(aggregate_content(self._articles(), budget).split()) <= budget

    def test_negative_budget_rejected(self):
        with pytest.raises(ValueError):
            aggregate_content([], -1)
