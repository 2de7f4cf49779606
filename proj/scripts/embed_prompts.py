#!/usr/bin/env python3
# Copyright 2026 The vpe Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates include/vpe/prompt_templates.hpp from assets/prompts/*.txt."""

import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
NAMES = ["idea_generation", "self_evaluation", "sample_analysis", "insights", "revision"]

out = [
    "// Copyright 2026 The vpe Authors",
    "// SPDX-License-Identifier: Apache-2.0",
    "",
    "// Generated by scripts/embed_prompts.py from assets/prompts. Do not edit.",
    "",
    "#pragma once",
    "",
    "#include <string_view>",
    "",
    "namespace vpe::templates {",
    "",
]
for name in NAMES:
    text = (ROOT / "assets" / "prompts" / f"{name}.txt").read_text(encoding="utf-8")
    assert ")vpe\"" not in text
    out.append(f'inline constexpr std::string_view {name} = R"vpe({text})vpe";')
    out.append("")
out.append("}  // namespace vpe::templates")
out.append("")
(ROOT / "include" / "vpe" / "prompt_templates.hpp").write_text("\n".join(out), encoding="utf-8")
