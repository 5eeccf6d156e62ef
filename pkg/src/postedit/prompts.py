"""Deterministic rendering of generation and editing prompts.

Templates are plain text with ``{placeholder}`` markers.  Recognized
placeholders: ``{input}``, ``{output}``, ``{current_output}``,
``{actions}``.  Unknown braces pass through untouched, so inputs such as
linearized logical forms may contain ``{`` and ``}`` freely.  A rendered
prompt is instruction, exemplar blocks in the given order, then the query
block, joined by the template's separator; action lines always use the
positionless serialization.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .actions import ActionScript, serialize_script
from .errors import NoActionScript, TemplateMismatch


class TaskKind(str, Enum):
    MT = "MT"
    LF_TO_TEXT = "LF_TO_TEXT"


class RoleKind(str, Enum):
    GENERATOR = "GENERATOR"
    INTERPRETER_ZERO_SHOT = "INTERPRETER_ZERO_SHOT"
    INTERPRETER_FEW_SHOT = "INTERPRETER_FEW_SHOT"


_PLACEHOLDER = re.compile(r"\{(input|output|current_output|actions)\}")


def _fill(template: str, values: dict[str, str]) -> str:
    return _PLACEHOLDER.sub(lambda m: values.get(m.group(1), m.group(0)), template)


@dataclass(frozen=True)
class PromptTemplate:
    task_kind: TaskKind
    role_kind: RoleKind
    instruction: str
    exemplar_block: str
    query_block: str
    separator: str = "\n\n"
    system_text: str | None = None


@dataclass(frozen=True)
class RenderedPrompt:
    """Chat-style message list plus bookkeeping.

    ``query`` carries the instance input so offline backends can pair a
    prompt with its reference; remote backends ignore it.
    """

    messages: tuple[tuple[str, str], ...]
    char_count: int
    query: str | None = None

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a rendered prompt needs at least one message")
        if self.char_count != sum(len(c) for _, c in self.messages):
            raise ValueError("char_count does not match message contents")


def _assemble(template: PromptTemplate, blocks: Sequence[str], query: str) -> RenderedPrompt:
    sections = [template.instruction, *blocks, query]
    content = template.separator.join(s for s in sections if s)
    messages: list[tuple[str, str]] = []
    if template.system_text:
        messages.append(("system", template.system_text))
    messages.append(("user", content))
    return RenderedPrompt(
        messages=tuple(messages),
        char_count=sum(len(c) for _, c in messages),
        query=None,
    )


def build_generator_prompt(
    x: str,
    exemplars: Sequence[tuple[str, str]],
    template: PromptTemplate,
) -> RenderedPrompt:
    """Instruction, (x_j, y_j) demonstrations in the given order, query."""
    if template.role_kind is not RoleKind.GENERATOR:
        raise TemplateMismatch(f"expected a GENERATOR template, got {template.role_kind}")
    blocks = [
        _fill(template.exemplar_block, {"input": xj, "output": yj})
        for xj, yj in exemplars
    ]
    prompt = _assemble(template, blocks, _fill(template.query_block, {"input": x}))
    return RenderedPrompt(prompt.messages, prompt.char_count, query=x)


def build_interpreter_prompt(
    x: str,
    y_i: str,
    script: ActionScript,
    exemplars: Sequence[tuple[str, str, ActionScript, str]],
    template: PromptTemplate,
) -> RenderedPrompt:
    """Instruction, editing demonstrations, then the (x, y_i, actions) query.

    Each demonstration is (input, imperfect output, corrupted actions,
    corrected output); action lines are serialized without positions.
    """
    if template.role_kind is RoleKind.GENERATOR:
        raise TemplateMismatch("interpreter prompt built from a GENERATOR template")
    if template.role_kind is RoleKind.INTERPRETER_ZERO_SHOT and exemplars:
        raise TemplateMismatch("zero-shot interpreter template given demonstrations")
    if script.is_noaction:
        raise NoActionScript("NoAction instances never reach the interpreter")
    blocks = [
        _fill(
            template.exemplar_block,
            {
                "input": xj,
                "current_output": y_star_j,
                "actions": serialize_script(a_j, with_positions=False),
                "output": yj,
            },
        )
        for xj, y_star_j, a_j, yj in exemplars
    ]
    query = _fill(
        template.query_block,
        {
            "input": x,
            "current_output": y_i,
            "actions": serialize_script(script, with_positions=False),
        },
    )
    prompt = _assemble(template, blocks, query)
    return RenderedPrompt(prompt.messages, prompt.char_count, query=x)


# --- template files -------------------------------------------------------

TEMPLATE_FORMAT = "postedit template v1"
_SECTION = re.compile(r"^--- (instruction|exemplar|query|system) ---$")
_ESCAPES = {"\\n": "\n", "\\t": "\t", "\\\\": "\\"}


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        pair = text[i : i + 2]
        if pair in _ESCAPES:
            out.append(_ESCAPES[pair])
            i += 2
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\n", "\\n").replace("\t", "\\t")


def load_template(path) -> PromptTemplate:
    """Read a template file (see :func:`dump_template` for the layout)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0] != f"# {TEMPLATE_FORMAT}":
        raise ValueError(f"not a {TEMPLATE_FORMAT} file: {path}")
    header: dict[str, str] = {}
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in lines[1:]:
        marker = _SECTION.match(line)
        if marker:
            current = sections.setdefault(marker.group(1), [])
            continue
        if current is not None:
            current.append(line)
            continue
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ValueError(f"bad template header line: {line!r}")
        header[key.strip()] = value.strip()
    for required in ("task", "role"):
        if required not in header:
            raise ValueError(f"template header missing {required!r}")
    for required in ("instruction", "query"):
        if required not in sections:
            raise ValueError(f"template missing section {required!r}")

    def section_text(name: str) -> str:
        # Trailing newlines are not significant in the section layout.
        return "\n".join(sections.get(name, [])).rstrip("\n")

    return PromptTemplate(
        task_kind=TaskKind(header["task"]),
        role_kind=RoleKind(header["role"]),
        instruction=section_text("instruction"),
        exemplar_block=section_text("exemplar"),
        query_block=section_text("query"),
        separator=_unescape(header.get("separator", "\\n\\n")),
        system_text=section_text("system") or None,
    )


def dump_template(template: PromptTemplate, path) -> None:
    parts = [
        f"# {TEMPLATE_FORMAT}",
        f"task: {template.task_kind.value}",
        f"role: {template.role_kind.value}",
        f"separator: {_escape(template.separator)}",
        "--- instruction ---",
        template.instruction,
        "--- exemplar ---",
        template.exemplar_block,
        "--- query ---",
        template.query_block,
    ]
    if template.system_text:
        parts += ["--- system ---", template.system_text]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


# --- built-in defaults ----------------------------------------------------

_INPUT_LABEL = {TaskKind.MT: "Source", TaskKind.LF_TO_TEXT: "Logical form"}
_OUTPUT_LABEL = {TaskKind.MT: "Translation", TaskKind.LF_TO_TEXT: "Text"}
_GENERATOR_INSTRUCTION = {
    TaskKind.MT: (
        "Translate the source text into English. "
        "Reply with the English translation only."
    ),
    TaskKind.LF_TO_TEXT: (
        "Write the English sentence that expresses the given logical form. "
        "Reply with the sentence only."
    ),
}
_INTERPRETER_INSTRUCTION = (
    "Edit the current output by applying the edit actions one by one, in "
    "the order given: INSERT adds the named word, DELETE removes it. Keep "
    "everything else unchanged and reply with the edited text only."
)


def default_templates(task: TaskKind) -> dict[RoleKind, PromptTemplate]:
    """Built-in templates for a task; editable copies via dump_template."""
    in_label = _INPUT_LABEL[task]
    out_label = _OUTPUT_LABEL[task]
    generator = PromptTemplate(
        task_kind=task,
        role_kind=RoleKind.GENERATOR,
        instruction=_GENERATOR_INSTRUCTION[task],
        exemplar_block=f"{in_label}: {{input}}\n{out_label}: {{output}}",
        query_block=f"{in_label}: {{input}}\n{out_label}:",
    )
    edit_block = (
        f"{in_label}: {{input}}\n"
        "Current output: {current_output}\n"
        "Actions: {actions}\n"
        "Edited output:"
    )
    interpreter_few = PromptTemplate(
        task_kind=task,
        role_kind=RoleKind.INTERPRETER_FEW_SHOT,
        instruction=_INTERPRETER_INSTRUCTION,
        exemplar_block=edit_block + " {output}",
        query_block=edit_block,
    )
    interpreter_zero = PromptTemplate(
        task_kind=task,
        role_kind=RoleKind.INTERPRETER_ZERO_SHOT,
        instruction=_INTERPRETER_INSTRUCTION,
        exemplar_block="",
        query_block=edit_block,
    )
    return {
        RoleKind.GENERATOR: generator,
        RoleKind.INTERPRETER_FEW_SHOT: interpreter_few,
        RoleKind.INTERPRETER_ZERO_SHOT: interpreter_zero,
    }
