#!/usr/bin/env python3
"""Regenerates include/ctot/tasks/templates.hpp from tests/golden/templates/*.txt."""
import pathlib

root = pathlib.Path(__file__).resolve().parent.parent
src = root / "tests" / "golden" / "templates"
out = root / "include" / "ctot" / "tasks" / "templates.hpp"

lines = [
    "#pragma once",
    "",
    "// Generated by tools/embed_templates.py from tests/golden/templates; do not edit.",
    "",
    "#include <string_view>",
    "",
    "namespace ctot::templates {",
    "",
]
for path in sorted(src.glob("*.txt")):
    text = path.read_text(encoding="utf-8")
    assert ')tpl"' not in text
    lines.append(f'inline constexpr std::string_view {path.stem} = R"tpl({text})tpl";')
    lines.append("")
lines.append("} // namespace ctot::templates")
out.write_text("\n".join(lines) + "\n", encoding="utf-8")
print(out)
