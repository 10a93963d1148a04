"""Minimal sectioned key = value configuration format.

Grammar (one construct per line):

    # comment                      blank lines and #-comments are ignored
    [section]                      section header; may contain spaces
    key = value                    inside a section; value runs to line end

Values keep their raw text; typed accessors convert on demand and report
the offending line on failure. Duplicate keys within a section and keys
outside any section are errors.
"""

from __future__ import annotations


class ConfigError(Exception):
    """Configuration file problem, with file/line context in the message."""


class Section:
    def __init__(self, name: str, line: int, source: str):
        self.name = name
        self.line = line
        self.source = source
        self.entries: dict[str, tuple[str, int]] = {}
        self.read: set[str] = set()

    def _where(self, line: int) -> str:
        return f"{self.source}:{line}"

    def has(self, key: str) -> bool:
        return key in self.entries

    def raw(self, key: str, default: str | None = None) -> str | None:
        if key not in self.entries:
            return default
        self.read.add(key)
        return self.entries[key][0]

    def _require(self, key: str) -> tuple[str, int]:
        if key not in self.entries:
            raise ConfigError(
                f"{self.source}: section [{self.name}] is missing key {key!r}"
            )
        self.read.add(key)
        return self.entries[key]

    def get_str(self, key: str, default: str | None = None) -> str | None:
        if key not in self.entries and default is not None:
            return default
        value, _ = self._require(key)
        return value

    def get_int(self, key: str, default: int | None = None) -> int | None:
        if key not in self.entries:
            return default
        value, line = self._require(key)
        try:
            return int(value)
        except ValueError:
            raise ConfigError(
                f"{self._where(line)}: key {key!r} expects an integer, got {value!r}"
            ) from None

    def get_float(self, key: str, default: float | None = None) -> float | None:
        if key not in self.entries:
            return default
        value, line = self._require(key)
        try:
            return float(value)
        except ValueError:
            raise ConfigError(
                f"{self._where(line)}: key {key!r} expects a number, got {value!r}"
            ) from None

    def get_list(self, key: str, default: list[str] | None = None) -> list[str] | None:
        if key not in self.entries:
            return default
        value, line = self._require(key)
        items = [item.strip() for item in value.split(",") if item.strip()]
        if not items:
            raise ConfigError(
                f"{self._where(line)}: key {key!r} expects a comma-separated list"
            )
        return items

    def get_int_list(self, key: str, default: list[int] | None = None) -> list[int] | None:
        items = self.get_list(key)
        if items is None:
            return default
        _, line = self.entries[key]
        try:
            return [int(item) for item in items]
        except ValueError:
            raise ConfigError(
                f"{self._where(line)}: key {key!r} expects a list of integers"
            ) from None

    def get_mapping(self, key: str, default: dict[str, float] | None = None
                    ) -> dict[str, float] | None:
        """Parse ``name:number, name:number`` pairs."""
        if key not in self.entries:
            return default
        value, line = self._require(key)
        out: dict[str, float] = {}
        for item in value.split(","):
            item = item.strip()
            if not item:
                continue
            if ":" not in item:
                raise ConfigError(
                    f"{self._where(line)}: key {key!r} expects 'name:number' "
                    f"pairs, got {item!r}"
                )
            name, _, num = item.partition(":")
            name = name.strip()
            try:
                out[name] = float(num.strip())
            except ValueError:
                raise ConfigError(
                    f"{self._where(line)}: bad number for {name!r} in key {key!r}"
                ) from None
        if not out:
            raise ConfigError(f"{self._where(line)}: key {key!r} is empty")
        return out


class ParsedConfig:
    def __init__(self, source: str):
        self.source = source
        self.sections: dict[str, Section] = {}

    def section(self, name: str) -> Section:
        if name not in self.sections:
            raise ConfigError(f"{self.source}: missing section [{name}]")
        return self.sections[name]

    def optional_section(self, name: str) -> Section | None:
        return self.sections.get(name)

    def sections_with_prefix(self, prefix: str) -> list[Section]:
        return [s for n, s in self.sections.items() if n.startswith(prefix)]


def parse_config_text(text: str, source: str = "<config>") -> ParsedConfig:
    """Parse the sectioned key = value format; errors carry line numbers."""
    parsed = ParsedConfig(source)
    current: Section | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{source}:{lineno}: unterminated section header {raw!r}")
            name = line[1:-1].strip()
            if not name:
                raise ConfigError(f"{source}:{lineno}: empty section name")
            if name in parsed.sections:
                raise ConfigError(f"{source}:{lineno}: duplicate section [{name}]")
            current = Section(name, lineno, source)
            parsed.sections[name] = current
            continue
        if "=" not in line:
            raise ConfigError(
                f"{source}:{lineno}: expected 'key = value' or '[section]', got {raw!r}"
            )
        if current is None:
            raise ConfigError(f"{source}:{lineno}: key outside any section")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in current.entries:
            raise ConfigError(
                f"{source}:{lineno}: duplicate key {key!r} in section [{current.name}]"
            )
        current.entries[key] = (value, lineno)
    return parsed


def parse_config_file(path: str) -> ParsedConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, source=path)
