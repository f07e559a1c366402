"""Image manifest construction.

Each selected entity gets an ordered list of image file titles: the entity's
own portrait/illustration claim first, then files enumerated from its Commons
category. Category listing failures degrade the manifest for that entity
instead of aborting the run.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol

from ._text import normalize
from .kg import Entity

logger = logging.getLogger(__name__)

P_IMAGE = "P18"
P_COMMONS_CATEGORY = "P373"

DEFAULT_MAX_PER_ENTITY = 3


class ImageFetchError(Exception):
    """A category listing could not be obtained."""


@dataclass(frozen=True)
class ImageRef:
    """One image file attached to an entity."""

    title: str            # canonical "File:..." title, spaces not underscores
    source: str           # "claim" or "category"

    def __post_init__(self) -> None:
        if self.source not in ("claim", "category"):
            raise ValueError(f"unknown image source {self.source!r}")
        if not self.title.startswith("File:"):
            raise ValueError(f"image title must be File:-prefixed: {self.title!r}")


@dataclass
class ImageManifest:
    """Ordered images for one entity, primary claim image first."""

    entity_id: str
    images: list[ImageRef] = field(default_factory=list)
    fetch_failures: list[str] = field(default_factory=list)


def canonical_file_title(name: str) -> str:
    """Normalize a file name or title to the canonical ``File:...`` form."""
    title = name.replace("_", " ").strip()
    if title.lower().startswith("file:"):
        title = title[5:].strip()
    return f"File:{title}"


def file_title_key(title: str) -> str:
    """Dedup key for file titles: canonical form, casefolded."""
    return normalize(canonical_file_title(title))


def primary_image_of(e: Entity) -> str | None:
    """The entity's first image claim as a canonical title, if any."""
    for value in e.claims.get(P_IMAGE, ()):
        if value.kind == "text" and value.value.strip():
            return canonical_file_title(value.value)
    return None


def commons_category_of(e: Entity) -> str | None:
    """The entity's Commons category name, without the namespace prefix.

    The dedicated category claim wins; a category-namespace commonswiki
    sitelink is the fallback.
    """
    for value in e.claims.get(P_COMMONS_CATEGORY, ()):
        if value.kind == "text" and value.value.strip():
            return _strip_category_prefix(value.value)
    sitelink = e.sitelinks.get("commonswiki", "")
    if sitelink.startswith("Category:"):
        return _strip_category_prefix(sitelink)
    return None


def _strip_category_prefix(name: str) -> str:
    name = name.replace("_", " ").strip()
    if name.lower().startswith("category:"):
        name = name[9:].strip()
    return name


class CommonsClient(Protocol):
    """Anything that can list the files inside a Commons category."""

    def category_files(self, category: str) -> list[str]:
        """File titles in the category, in listing order."""
        ...


class HttpCommonsClient:
    """Commons category listing via the MediaWiki API."""

    def __init__(
        self,
        endpoint: str = "https://commons.wikimedia.org/w/api.php",
        session=None,
        timeout: float = 30.0,
        page_size: int = 500,
    ) -> None:
        import requests

        self.endpoint = endpoint
        self.session = session or requests.Session()
        self.timeout = timeout
        self.page_size = page_size

    def category_files(self, category: str) -> list[str]:
        titles: list[str] = []
        params = {
            "action": "query",
            "list": "categorymembers",
            "cmtitle": f"Category:{category}",
            "cmtype": "file",
            "cmlimit": str(self.page_size),
            "format": "json",
        }
        while True:
            try:
                resp = self.session.get(self.endpoint, params=params, timeout=self.timeout)
                resp.raise_for_status()
                payload = resp.json()
            except Exception as exc:
                raise ImageFetchError(f"category listing failed for {category!r}: {exc}") from exc
            members = payload.get("query", {}).get("categorymembers", [])
            titles.extend(m["title"] for m in members if isinstance(m.get("title"), str))
            cont = payload.get("continue", {}).get("cmcontinue")
            if not cont:
                return titles
            params["cmcontinue"] = cont


class ReplayCommonsClient:
    """Serves category listings from a recorded store; misses are errors."""

    def __init__(self, path: str | os.PathLike) -> None:
        self.path = os.fspath(path)
        self._listings = _load_listing_store(self.path)

    def category_files(self, category: str) -> list[str]:
        key = normalize(category)
        if key not in self._listings:
            raise ImageFetchError(f"no recorded listing for category {category!r}")
        return list(self._listings[key])


class RecordingCommonsClient:
    """Wraps a live client, persisting every listing for later replay."""

    def __init__(self, inner: CommonsClient, path: str | os.PathLike) -> None:
        self.inner = inner
        self.path = os.fspath(path)
        self._listings = _load_listing_store(self.path)
        self._lock = threading.Lock()

    def category_files(self, category: str) -> list[str]:
        key = normalize(category)
        with self._lock:
            if key in self._listings:
                return list(self._listings[key])
        titles = self.inner.category_files(category)
        with self._lock:
            self._listings[key] = list(titles)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"category": category, "files": titles}, ensure_ascii=False) + "\n")
        return titles


def _load_listing_store(path: str) -> dict[str, list[str]]:
    listings: dict[str, list[str]] = {}
    if not os.path.exists(path):
        return listings
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            listings[normalize(obj["category"])] = list(obj["files"])
    return listings


def manifest_for_entity(
    e: Entity,
    client: CommonsClient | None,
    max_per_entity: int = DEFAULT_MAX_PER_ENTITY,
    category_cache: dict[str, object] | None = None,
) -> ImageManifest:
    """Build one entity's manifest: claim image first, category files after.

    Duplicate titles (case- and underscore-insensitive) are kept once, first
    occurrence wins, so the claim image always stays at index 0.
    """
    manifest = ImageManifest(entity_id=e.id)
    seen: set[str] = set()

    primary = primary_image_of(e)
    if primary is not None:
        manifest.images.append(ImageRef(title=primary, source="claim"))
        seen.add(file_title_key(primary))

    if len(manifest.images) >= max_per_entity:
        return manifest

    category = commons_category_of(e)
    if category is None or client is None:
        return manifest

    cache_key = normalize(category)
    listing: object
    if category_cache is not None and cache_key in category_cache:
        listing = category_cache[cache_key]
    else:
        try:
            listing = client.category_files(category)
        except ImageFetchError as exc:
            listing = exc
        if category_cache is not None:
            category_cache[cache_key] = listing

    if isinstance(listing, ImageFetchError):
        manifest.fetch_failures.append(str(listing))
        return manifest

    for name in listing:
        if len(manifest.images) >= max_per_entity:
            break
        title = canonical_file_title(name)
        key = normalize(title)
        if key in seen:
            continue
        seen.add(key)
        manifest.images.append(ImageRef(title=title, source="category"))
    return manifest


def build_image_manifest(
    selected: Iterable[Entity],
    client: CommonsClient | None,
    max_per_entity: int = DEFAULT_MAX_PER_ENTITY,
    max_in_flight: int = 4,
    progress: Callable[[int], None] | None = None,
) -> list[ImageManifest]:
    """Manifests for every entity, in input order.

    Category listings run concurrently up to ``max_in_flight``; repeated
    categories are fetched once per run. Output order is the input order, so
    results are stable regardless of completion order.
    """
    entities = list(selected)
    categories: list[str] = []
    seen_cats: set[str] = set()
    for e in entities:
        cat = commons_category_of(e)
        if cat is not None:
            key = normalize(cat)
            if key not in seen_cats:
                seen_cats.add(key)
                categories.append(cat)

    cache: dict[str, object] = {}
    if client is not None and categories:
        def fetch(cat: str):
            try:
                return client.category_files(cat)
            except ImageFetchError as exc:
                return exc

        with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
            for cat, listing in zip(categories, pool.map(fetch, categories)):
                cache[normalize(cat)] = listing

    manifests: list[ImageManifest] = []
    for i, e in enumerate(entities):
        manifests.append(
            manifest_for_entity(e, client, max_per_entity=max_per_entity, category_cache=cache)
        )
        if progress is not None:
            progress(i + 1)
    return manifests
