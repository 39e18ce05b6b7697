"""GitHub REST v3 client for peer-review issue threads.

Lists every issue carrying the approval label, then every comment on each
issue, following ``Link`` header pagination. Pages are fetched through a
bounded thread pool; the resulting stream is ordered by
(issue_number, comment position) regardless of fetch order.
"""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator
from urllib.parse import parse_qs, urlencode, urlparse, urlunparse

import requests

from .corpus import RawComment, format_timestamp, parse_timestamp
from .errors import AuthFailedError, MalformedPageError, NotFoundError, RateLimitedError

logger = logging.getLogger(__name__)

API_URL = "https://api.github.com"
TOKEN_ENV = "GITHUB_TOKEN"

# rOpenSci: "submission: pkgname: title" or "pkgname: title"; BioConductor: "pkgname".
PACKAGE_TITLE_PATTERNS = {
    "ropensci": r"^\s*(?i:\[?(?:pre-?)?submission\]?\s*:?\s*)?(?P<package>[A-Za-z][A-Za-z0-9._]*)",
    "bioconductor": r"^\s*(?P<package>[A-Za-z][A-Za-z0-9.]*)",
}
DEFAULT_TITLE_PATTERN = r"^\s*(?P<package>[A-Za-z][A-Za-z0-9._-]*)"

_LINK = re.compile(r'<([^>]+)>\s*;\s*rel="([^"]+)"')


def parse_link_header(value: str | None) -> dict[str, str]:
    if not value:
        return {}
    return {rel: url for url, rel in _LINK.findall(value)}


def package_from_title(title: str, pattern: str) -> str:
    m = re.search(pattern, title or "")
    if m is None:
        return (title or "").strip()
    return m.groupdict().get("package") or m.group(0).strip()


@dataclass
class CrawlStats:
    requests: int = 0
    issues: int = 0
    comments: int = 0
    skipped_pages: int = 0
    rate_limit_waits: int = 0
    skipped_urls: list[str] = field(default_factory=list)


class IssueCrawler:
    """Fetch review comments of labeled issues from one repository.

    ``sleep`` is injectable so tests can observe backoff without waiting.
    """

    def __init__(
        self,
        repo: str,
        platform: str,
        approved_label: str,
        token: str | None = None,
        api_url: str = API_URL,
        title_pattern: str | None = None,
        per_page: int = 100,
        concurrency: int = 4,
        max_retries: int = 5,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 30.0,
    ):
        self.repo = repo
        self.platform = platform
        self.approved_label = approved_label
        self.api_url = api_url.rstrip("/")
        self.title_pattern = title_pattern or PACKAGE_TITLE_PATTERNS.get(platform.lower(), DEFAULT_TITLE_PATTERN)
        self.per_page = per_page
        self.concurrency = max(1, concurrency)
        self.max_retries = max_retries
        self.sleep = sleep
        self.timeout = timeout
        self.stats = CrawlStats()
        self._lock = threading.Lock()
        self.session = session or requests.Session()
        self.session.headers.setdefault("Accept", "application/vnd.github.v3+json")
        if token:
            self.session.headers["Authorization"] = f"token {token}"

    # -- transport ---------------------------------------------------------

    def _get(self, url: str) -> requests.Response:
        for attempt in range(self.max_retries + 1):
            with self._lock:
                self.stats.requests += 1
            resp = self.session.get(url, timeout=self.timeout)
            try:
                self._raise_for_status(resp, url)
            except RateLimitedError as exc:
                if attempt == self.max_retries:
                    raise
                with self._lock:
                    self.stats.rate_limit_waits += 1
                logger.warning("rate limited on %s, sleeping %.1fs", url, exc.retry_after)
                self.sleep(exc.retry_after)
                continue
            return resp
        raise AssertionError("unreachable")

    @staticmethod
    def _raise_for_status(resp: requests.Response, url: str) -> None:
        code = resp.status_code
        if code < 400:
            return
        remaining = resp.headers.get("X-RateLimit-Remaining")
        if code == 429 or (code == 403 and remaining == "0"):
            if "Retry-After" in resp.headers:
                wait = float(resp.headers["Retry-After"])
            else:
                reset = float(resp.headers.get("X-RateLimit-Reset", time.time() + 60))
                wait = max(reset - time.time(), 1.0)
            raise RateLimitedError(wait, url)
        if code == 401:
            raise AuthFailedError(f"authentication failed for {url}")
        if code == 404:
            raise NotFoundError(url)
        resp.raise_for_status()

    def _page(self, url: str) -> tuple[list | None, dict[str, str]]:
        """One page as (items, links); items is None when the page is malformed."""
        resp = self._get(url)
        links = parse_link_header(resp.headers.get("Link"))
        try:
            items = resp.json()
            if not isinstance(items, list):
                raise MalformedPageError(url, "expected a JSON array")
        except (ValueError, MalformedPageError) as exc:
            with self._lock:
                self.stats.skipped_pages += 1
                self.stats.skipped_urls.append(url)
            logger.warning("skipping malformed page %s: %s", url, exc)
            return None, links
        return items, links

    @staticmethod
    def _with_page(url: str, page: int) -> str:
        parts = urlparse(url)
        q = parse_qs(parts.query)
        q["page"] = [str(page)]
        return urlunparse(parts._replace(query=urlencode(q, doseq=True)))

    def _paginate(self, url: str, pool: ThreadPoolExecutor) -> list:
        """All items from a paginated listing, in page order.

        When the first page advertises ``rel="last"`` the remaining pages are
        fetched concurrently; otherwise ``rel="next"`` is followed.
        """
        items, links = self._page(url)
        pages = [items or []]
        last = links.get("last")
        if last:
            n_last = int(parse_qs(urlparse(last).query).get("page", ["1"])[0])
            urls = [self._with_page(url, p) for p in range(2, n_last + 1)]
            for page_items, _ in pool.map(self._page, urls):
                pages.append(page_items or [])
        else:
            nxt = links.get("next")
            while nxt:
                page_items, links = self._page(nxt)
                pages.append(page_items or [])
                nxt = links.get("next")
        return [it for page in pages for it in page]

    # -- public --------------------------------------------------------------

    def issues(self, pool: ThreadPoolExecutor) -> list[dict]:
        query = urlencode({"labels": self.approved_label, "state": "all", "per_page": self.per_page})
        url = f"{self.api_url}/repos/{self.repo}/issues?{query}"
        found = [it for it in self._paginate(url, pool) if isinstance(it, dict) and "pull_request" not in it]
        found.sort(key=lambda it: int(it["number"]))
        return found

    def comments(self, issue: dict, pool: ThreadPoolExecutor) -> list[RawComment]:
        number = int(issue["number"])
        url = f"{self.api_url}/repos/{self.repo}/issues/{number}/comments?per_page={self.per_page}"
        package = package_from_title(issue.get("title", ""), self.title_pattern)
        out = []
        for c in self._paginate(url, pool):
            try:
                out.append(
                    RawComment(
                        platform=self.platform,
                        package=package,
                        issue_number=number,
                        comment_id=str(c["id"]),
                        created_at=format_timestamp(parse_timestamp(c["created_at"])),
                        body=c.get("body") or "",
                        url=c.get("html_url") or c.get("url") or "",
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                logger.warning("skipping malformed comment on issue %d: %s", number, exc)
        return out

    def crawl(self) -> Iterator[RawComment]:
        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            issues = self.issues(pool)
            self.stats.issues = len(issues)
            for issue in issues:
                for c in self.comments(issue, pool):
                    self.stats.comments += 1
                    yield c


def crawl_issues(
    repo: str,
    approved_label: str,
    auth_token: str | None = None,
    platform: str = "github",
    **kwargs,
) -> Iterator[RawComment]:
    """Stream every comment of every issue in ``repo`` labeled ``approved_label``."""
    if auth_token is None:
        auth_token = os.environ.get(TOKEN_ENV)
    crawler = IssueCrawler(repo, platform, approved_label, token=auth_token, **kwargs)
    return crawler.crawl()
