"""Export job description, loaded from a JSON document."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import JobError


@dataclass(frozen=True)
class ExportJob:
    """One batch-encoding job: which encoder, which texts, how to emit.

    ``input_texts`` is an ordered list of (id, text) pairs; ids must be
    nonempty and unique because they become UECS record ids.
    """

    encoder_id: str
    input_texts: tuple[tuple[str, str], ...] = field(default_factory=tuple)
    batch_size: int = 32
    normalize: bool = True

    def __post_init__(self):
        if not self.encoder_id:
            raise JobError("encoder_id must be nonempty")
        if self.batch_size < 1:
            raise JobError("batch_size must be a positive integer")
        object.__setattr__(self, "input_texts", tuple(
            (str(i), str(t)) for i, t in self.input_texts
        ))
        if not self.input_texts:
            raise JobError("input_texts must contain at least one (id, text) pair")
        seen = set()
        for text_id, _text in self.input_texts:
            if not text_id:
                raise JobError("text ids must be nonempty")
            if text_id in seen:
                raise JobError(f"duplicate text id {text_id!r}")
            seen.add(text_id)

    @classmethod
    def from_json(cls, text: str) -> "ExportJob":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise JobError(f"job document is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or "encoder_id" not in doc:
            raise JobError("job document must be an object with an 'encoder_id' field")
        raw_texts = doc.get("texts", [])
        pairs = []
        for entry in raw_texts:
            if isinstance(entry, dict):
                if "id" not in entry or "text" not in entry:
                    raise JobError(f"text entry missing id/text: {entry!r}")
                pairs.append((entry["id"], entry["text"]))
            elif isinstance(entry, (list, tuple)) and len(entry) == 2:
                pairs.append((entry[0], entry[1]))
            else:
                raise JobError(f"text entry must be [id, text] or {{id, text}}: {entry!r}")
        return cls(
            encoder_id=doc["encoder_id"],
            input_texts=tuple(pairs),
            batch_size=int(doc.get("batch_size", 32)),
            normalize=bool(doc.get("normalize", True)),
        )

    @classmethod
    def from_path(cls, path: str) -> "ExportJob":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())
