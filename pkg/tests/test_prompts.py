"""Prompt rendering tests."""

import pytest

from postedit.actions import NO_ACTION, ActionScript, EditAction, Op, serialize_script
from postedit.errors import NoActionScript, TemplateMismatch
from postedit.prompts import (
    RoleKind,
    TaskKind,
    build_generator_prompt,
    build_interpreter_prompt,
    default_templates,
    dump_template,
    load_template,
)


@pytest.fixture
def templates():
    return default_templates(TaskKind.MT)


def user_text(prompt):
    return "\n".join(c for role, c in prompt.messages if role == "user")


SCRIPT = ActionScript((EditAction(Op.DELETE, "cat", 1), EditAction(Op.INSERT, "dog", 1)))


class TestGeneratorPrompt:
    def test_zero_shot_contains_instruction_and_query(self, templates):
        prompt = build_generator_prompt("src", [], templates[RoleKind.GENERATOR])
        text = user_text(prompt)
        assert "src" in text
        assert templates[RoleKind.GENERATOR].instruction in text
        assert text.count("Source:") == 1  # no exemplar block

    def test_exemplars_verbatim_in_order(self, templates):
        exemplars = [("x one", "y one"), ("x two", "y two")]
        prompt = build_generator_prompt("q", exemplars, templates[RoleKind.GENERATOR])
        text = user_text(prompt)
        assert text.index("x one") < text.index("x two")
        for x, y in exemplars:
            assert x in text and y in text

    def test_byte_identical_rendering(self, templates):
        a = build_generator_prompt("q", [("x", "y")], templates[RoleKind.GENERATOR])
        b = build_generator_prompt("q", [("x", "y")], templates[RoleKind.GENERATOR])
        assert a == b

    def test_role_mismatch(self, templates):
        with pytest.raises(TemplateMismatch):
            build_generator_prompt("q", [], templates[RoleKind.INTERPRETER_FEW_SHOT])

    def test_query_metadata(self, templates):
        prompt = build_generator_prompt("the input", [], templates[RoleKind.GENERATOR])
        assert prompt.query == "the input"

    def test_char_count(self, templates):
        prompt = build_generator_prompt("q", [], templates[RoleKind.GENERATOR])
        assert prompt.char_count == sum(len(c) for _, c in prompt.messages)

    def test_braces_in_input_survive(self, templates):
        prompt = build_generator_prompt(
            "(want-01 :ARG0 {he})", [], templates[RoleKind.GENERATOR]
        )
        assert "(want-01 :ARG0 {he})" in user_text(prompt)


class TestInterpreterPrompt:
    def test_zero_shot_contains_script_and_text(self, templates):
        template = templates[RoleKind.INTERPRETER_ZERO_SHOT]
        prompt = build_interpreter_prompt("x", "the cat sat", SCRIPT, [], template)
        text = user_text(prompt)
        assert "the cat sat" in text
        assert serialize_script(SCRIPT, with_positions=False) in text
        assert "@" not in text  # positionless rendering

    def test_rejects_noaction(self, templates):
        with pytest.raises(NoActionScript):
            build_interpreter_prompt(
                "x", "y", NO_ACTION, [], templates[RoleKind.INTERPRETER_ZERO_SHOT]
            )

    def test_zero_shot_rejects_exemplars(self, templates):
        exemplar = ("xj", "imperfect", SCRIPT, "fixed")
        with pytest.raises(TemplateMismatch):
            build_interpreter_prompt(
                "x", "y", SCRIPT, [exemplar], templates[RoleKind.INTERPRETER_ZERO_SHOT]
            )

    def test_demonstration_count(self, templates):
        template = templates[RoleKind.INTERPRETER_FEW_SHOT]
        exemplars = [
            (f"x{i}", f"bad{i}", ActionScript((EditAction(Op.INSERT, f"w{i}"),)), f"good{i}")
            for i in range(10)
        ]
        prompt = build_interpreter_prompt("q", "cur", SCRIPT, exemplars, template)
        assert user_text(prompt).count("Current output:") == 11  # 10 demos + query

    def test_empty_corrupted_script_renders_empty_line(self, templates):
        template = templates[RoleKind.INTERPRETER_FEW_SHOT]
        exemplars = [("xj", "imperfect", ActionScript(()), "fixed")]
        prompt = build_interpreter_prompt("q", "cur", SCRIPT, exemplars, template)
        assert "Actions: \n" in user_text(prompt)

    def test_query_script_appears_exactly_once(self, templates):
        template = templates[RoleKind.INTERPRETER_FEW_SHOT]
        exemplars = [
            ("xj", "bad", ActionScript((EditAction(Op.INSERT, "other"),)), "good")
        ]
        prompt = build_interpreter_prompt("q", "cur", SCRIPT, exemplars, template)
        rendered = serialize_script(SCRIPT, with_positions=False)
        assert user_text(prompt).count(rendered) == 1

    def test_distinct_scripts_distinct_prompts(self, templates):
        template = templates[RoleKind.INTERPRETER_ZERO_SHOT]
        other = ActionScript((EditAction(Op.INSERT, "bird", 0),))
        a = build_interpreter_prompt("x", "y", SCRIPT, [], template)
        b = build_interpreter_prompt("x", "y", other, [], template)
        assert a != b


class TestTemplateFiles:
    def test_roundtrip(self, tmp_path, templates):
        for role, template in templates.items():
            path = tmp_path / f"{role.value}.txt"
            dump_template(template, path)
            assert load_template(path) == template

    def test_multiline_sections(self, tmp_path):
        from postedit.prompts import PromptTemplate

        template = PromptTemplate(
            task_kind=TaskKind.LF_TO_TEXT,
            role_kind=RoleKind.GENERATOR,
            instruction="line one\nline two",
            exemplar_block="In: {input}\nOut: {output}",
            query_block="In: {input}\nOut:",
            separator="\n---\n",
            system_text="be terse",
        )
        path = tmp_path / "t.txt"
        dump_template(template, path)
        assert load_template(path) == template

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not a template\n")
        with pytest.raises(ValueError):
            load_template(path)

    def test_rejects_missing_section(self, tmp_path):
        path = tmp_path / "incomplete.txt"
        path.write_text(
            "# postedit template v1\ntask: MT\nrole: GENERATOR\n--- instruction ---\nhi\n"
        )
        with pytest.raises(ValueError):
            load_template(path)
