"""The constrained robot action vocabulary.

The shipped manifest (``data/actions.json``) holds 56 actions in six
categories. Action names are reconstructed: only the per-category counts are
fixed, the individual identifiers were chosen to be plausible household
robot behaviours.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import CatalogError

CATEGORY_COUNTS: dict[str, int] = {
    "Basic Movement and Handling": 8,
    "Grasping and Manipulation": 6,
    "Cleaning and Organizing": 15,
    "Dynamic and Precise Actions": 14,
    "Task-Specific Functions": 8,
    "Cognitive and Interactive Tasks": 5,
}

_NORMALIZE = re.compile(r"[\s_]+")


def normalize_action_name(name: str) -> str:
    return _NORMALIZE.sub("", name).lower()


@dataclass(frozen=True)
class CategoryDef:
    name: str
    declared_count: int


@dataclass(frozen=True)
class ActionDef:
    id: str
    category: CategoryDef
    description: str = ""


@dataclass(frozen=True)
class ActionCatalog:
    categories: tuple[CategoryDef, ...]
    actions: dict[str, ActionDef]
    _normalized: dict[str, str] = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.actions)

    def __contains__(self, name: object) -> bool:
        return isinstance(name, str) and self.resolve(name) is not None

    def ids(self) -> list[str]:
        return list(self.actions)

    def in_category(self, category: str) -> list[ActionDef]:
        return [a for a in self.actions.values() if a.category.name == category]

    def resolve(self, name: str) -> str | None:
        """Exact identifier match, then case/underscore/space-insensitive match."""
        if name in self.actions:
            return name
        return self._normalized.get(normalize_action_name(name))


def resolve_action(catalog: ActionCatalog, name: str) -> str | None:
    return catalog.resolve(name)


def catalog_from_dict(obj: dict) -> ActionCatalog:
    if not isinstance(obj, dict) or not isinstance(obj.get("categories"), list):
        raise CatalogError("manifest must be an object with a 'categories' array")
    categories: list[CategoryDef] = []
    actions: dict[str, ActionDef] = {}
    normalized: dict[str, str] = {}
    for cat in obj["categories"]:
        name = cat.get("name")
        if name not in CATEGORY_COUNTS:
            raise CatalogError(f"unknown category name {name!r}")
        if any(c.name == name for c in categories):
            raise CatalogError(f"category {name!r} listed twice")
        listed = cat.get("actions", [])
        declared = cat.get("declared_count", CATEGORY_COUNTS[name])
        if not isinstance(declared, int) or declared <= 0:
            raise CatalogError(f"category {name!r}: declared_count must be a positive integer")
        if len(listed) != declared:
            raise CatalogError(
                f"category {name!r} declares {declared} actions but lists {len(listed)}"
            )
        cdef = CategoryDef(name, declared)
        categories.append(cdef)
        for entry in listed:
            aid = entry.get("id") if isinstance(entry, dict) else None
            if not isinstance(aid, str) or not aid:
                raise CatalogError(f"category {name!r}: action entry without an id")
            norm = normalize_action_name(aid)
            if aid in actions or norm in normalized:
                raise CatalogError(f"duplicate action identifier {aid!r}")
            actions[aid] = ActionDef(aid, cdef, entry.get("description", ""))
            normalized[norm] = aid
    return ActionCatalog(tuple(categories), actions, normalized)


def load_catalog(source: str) -> ActionCatalog:
    """Build a catalog from manifest JSON text."""
    try:
        obj = json.loads(source)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"manifest is not valid JSON: {exc}") from None
    return catalog_from_dict(obj)


def load_catalog_file(path: str | Path) -> ActionCatalog:
    return load_catalog(Path(path).read_text(encoding="utf-8"))


def default_catalog_text() -> str:
    return resources.files("llmsap.data").joinpath("actions.json").read_text(encoding="utf-8")


def default_catalog() -> ActionCatalog:
    return load_catalog(default_catalog_text())
