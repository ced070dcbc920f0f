from __future__ import annotations

import pytest
from corpus import CORPUS

from dbcopilot.errors import NoPendingPlan, PlanCancelled
from dbcopilot.llm import ModelResponse, ScriptedBackend, ScriptStep
from dbcopilot.safety import (
    HIGH_RISK_REASONS,
    ActionPlan,
    PiiLexicon,
    PlanStep,
    RiskLevel,
    RiskReason,
    advance_confirmation,
    assess_risk,
    build_action_plan,
    detect_pii_columns,
    intercept_star_select,
)
from dbcopilot.schemaindex import SchemaContext, TableCandidate, build_schema_context
from dbcopilot.sqlanalyzer import profile_statement


@pytest.fixture()
def demo_context(demo_db):
    candidates = [TableCandidate(t, 1.0) for t in demo_db.list_tables()]
    return build_schema_context(demo_db, candidates, budget=100_000)


def _profiles(*statements):
    return [(profile_statement(sql), sql) for sql in statements]


class TestAssessRisk:
    def test_benign_select_is_low(self, demo_context):
        assessment = assess_risk(
            "what products do we sell", _profiles("SELECT name FROM products"),
            demo_context,
        )
        assert assessment.level is RiskLevel.LOW
        assert assessment.reasons == []

    def test_delete_is_high_state_modifying(self, demo_context):
        assessment = assess_risk(
            "remove user 5", _profiles("DELETE FROM users WHERE id=5"), demo_context
        )
        assert assessment.level is RiskLevel.HIGH
        assert RiskReason.STATE_MODIFYING in assessment.reasons

    def test_ambiguous_admin_request_without_statements(self, demo_context):
        assessment = assess_risk("clean up old logs", [], demo_context)
        assert assessment.level is RiskLevel.HIGH
        assert assessment.reasons == [RiskReason.AMBIGUOUS_ADMIN_REQUEST]

    def test_concrete_statement_suppresses_ambiguity(self, demo_context):
        assessment = assess_risk(
            "clean up old logs",
            _profiles("DELETE FROM logs WHERE created_at < '2024-01-01'"),
            demo_context,
        )
        assert RiskReason.AMBIGUOUS_ADMIN_REQUEST not in assessment.reasons

    def test_pii_column_read_is_high(self, demo_context):
        assessment = assess_risk(
            "emails please", _profiles("SELECT email FROM users"), demo_context
        )
        assert assessment.level is RiskLevel.HIGH
        assert RiskReason.SENSITIVE_COLUMNS in assessment.reasons

    def test_maiden_name_style_column(self, demo_db):
        demo_db.run_non_query("ALTER TABLE users ADD COLUMN mother_maiden_name TEXT")
        context = build_schema_context(
            demo_db, [TableCandidate("users", 1.0)], budget=100_000
        )
        assessment = assess_risk(
            "security answers",
            _profiles("SELECT mother_maiden_name FROM users"),
            context,
        )
        assert assessment.level is RiskLevel.HIGH
        assert RiskReason.SENSITIVE_COLUMNS in assessment.reasons

    def test_star_projection_alone_is_low(self, demo_context):
        # logs has no PII columns; the star playbook handles this case.
        assessment = assess_risk(
            "show logs", _profiles("SELECT * FROM logs"), demo_context
        )
        assert RiskReason.STAR_PROJECTION in assessment.reasons
        assert assessment.level is RiskLevel.LOW

    def test_star_over_pii_table_is_high(self, demo_context):
        assessment = assess_risk(
            "everything about users", _profiles("SELECT * FROM users"), demo_context
        )
        assert RiskReason.SENSITIVE_COLUMNS in assessment.reasons
        assert assessment.level is RiskLevel.HIGH

    def test_large_table_needs_stats(self, demo_context):
        profiles = _profiles("SELECT name FROM products")
        without = assess_risk("q", profiles, demo_context)
        assert RiskReason.LARGE_TABLE not in without.reasons
        with_stats = assess_risk(
            "q", profiles, demo_context, stats={"products": 5_000_000}
        )
        assert RiskReason.LARGE_TABLE in with_stats.reasons
        assert with_stats.level is RiskLevel.HIGH

    def test_below_threshold_not_large(self, demo_context):
        assessment = assess_risk(
            "q", _profiles("SELECT name FROM products"), demo_context,
            stats={"products": 99_999},
        )
        assert RiskReason.LARGE_TABLE not in assessment.reasons

    def test_destructive_reason(self, demo_context):
        assessment = assess_risk("drop logs", _profiles("DROP TABLE logs"), demo_context)
        assert RiskReason.DESTRUCTIVE in assessment.reasons
        assert assessment.triggering_statement == "DROP TABLE logs"

    def test_level_high_iff_high_reason_present(self, demo_context):
        for item in CORPUS:
            assessment = assess_risk("run this", _profiles(item.sql), demo_context)
            has_high = bool(set(assessment.reasons) & HIGH_RISK_REASONS)
            assert (assessment.level is RiskLevel.HIGH) == has_high

    def test_rephrasing_keeps_level_without_ambiguity_rule(self, demo_context):
        profiles = _profiles("DELETE FROM logs")
        a = assess_risk("delete every log entry", profiles, demo_context)
        b = assess_risk("please remove all the log rows", profiles, demo_context)
        assert a.level == b.level == RiskLevel.HIGH


class TestPiiLexicon:
    def test_user_bio_flagged(self, demo_context):
        flagged = detect_pii_columns(demo_context)
        assert ("users", "user_bio") in flagged

    def test_plain_columns_not_flagged(self):
        lexicon = PiiLexicon()
        for name in ("id", "quantity", "price"):
            assert not lexicon.matches(name)

    def test_customer_email_flagged(self):
        assert PiiLexicon().matches("customer_email")

    def test_salary_and_phone_flagged(self, demo_context):
        flagged = detect_pii_columns(demo_context)
        assert ("employees", "salary") in flagged
        assert ("employees", "phone") in flagged

    def test_empty_lexicon_rejected(self):
        with pytest.raises(ValueError):
            PiiLexicon(patterns=())

    def test_judge_adds_but_never_removes(self, demo_context):
        judge = ScriptedBackend(
            [ScriptStep(ModelResponse(kind="text", text="reviews.body looks personal"))]
        )
        with_judge = detect_pii_columns(demo_context, judge=judge)
        lexicon_only = detect_pii_columns(demo_context)
        assert set(lexicon_only) <= set(with_judge)
        assert ("reviews", "body") in with_judge

    def test_judge_failure_degrades_to_lexicon(self, demo_context, caplog):
        judge = ScriptedBackend([])  # immediately exhausted -> ProviderError
        with caplog.at_level("WARNING"):
            flagged = detect_pii_columns(demo_context, judge=judge)
        assert flagged == detect_pii_columns(demo_context)
        assert any("lexicon" in r.message for r in caplog.records)

    def test_judge_nonsense_names_ignored(self, demo_context):
        judge = ScriptedBackend(
            [ScriptStep(ModelResponse(kind="text", text="ghosts.ectoplasm"))]
        )
        assert detect_pii_columns(demo_context, judge=judge) == detect_pii_columns(
            demo_context
        )


class TestStarInterception:
    def test_star_select_intercepted_with_columns(self, demo_context):
        msg = intercept_star_select(
            profile_statement("SELECT * FROM logs"), demo_context
        )
        assert msg is not None
        assert msg.table == "logs"
        assert msg.columns == ["id", "created_at", "message"]
        for column in msg.columns:
            assert column in msg.text

    def test_narrow_select_not_intercepted(self, demo_context):
        assert intercept_star_select(
            profile_statement("SELECT id FROM logs"), demo_context
        ) is None

    def test_single_column_table_still_intercepted(self):
        from dbcopilot.dbadapter import ColumnSpec, TableSchema

        context = SchemaContext(
            tables=[TableSchema(name="t", columns=[ColumnSpec("only_col", "TEXT")])]
        )
        msg = intercept_star_select(profile_statement("SELECT * FROM t"), context)
        assert msg is not None
        assert msg.columns == ["only_col"]

    def test_unknown_table_still_intercepted(self):
        msg = intercept_star_select(
            profile_statement("SELECT * FROM mystery"), SchemaContext()
        )
        assert msg is not None
        assert msg.columns == []


class TestActionPlans:
    def _drop_plan(self) -> ActionPlan:
        sql = "DROP TABLE logs"
        profile = profile_statement(sql)
        assessment = assess_risk("drop logs", [(profile, sql)], SchemaContext())
        return build_action_plan("plan-1", [(sql, profile)], assessment)

    def _update_plan(self) -> ActionPlan:
        sql = "UPDATE users SET city = 'Hue' WHERE id = 1"
        profile = profile_statement(sql)
        assessment = assess_risk("move user", [(profile, sql)], SchemaContext())
        return build_action_plan("plan-2", [(sql, profile)], assessment)

    def test_destructive_requires_two_confirmations(self):
        plan = self._drop_plan()
        assert plan.confirmations_required == 2
        assert plan.warnings

    def test_non_destructive_requires_one(self):
        plan = self._update_plan()
        assert plan.confirmations_required == 1

    def test_double_confirmation_flow(self):
        plan = self._drop_plan()
        advance_confirmation(plan, "yes")
        assert plan.confirmations_received == 1
        assert not plan.executable
        advance_confirmation(plan, "proceed")
        assert plan.confirmations_received == 2
        assert plan.executable

    def test_rejection_cancels(self):
        plan = self._update_plan()
        with pytest.raises(PlanCancelled) as excinfo:
            advance_confirmation(plan, "no")
        assert excinfo.value.reply == "no"
        assert plan.cancelled
        with pytest.raises(NoPendingPlan):
            advance_confirmation(plan, "yes")

    def test_fully_confirmed_plan_rejects_more_replies(self):
        plan = self._update_plan()
        advance_confirmation(plan, "yes")
        with pytest.raises(NoPendingPlan):
            advance_confirmation(plan, "yes")

    def test_custom_approval_set(self):
        plan = self._update_plan()
        with pytest.raises(PlanCancelled):
            advance_confirmation(plan, "yes", approvals=frozenset({"affirmative"}))

    def test_monotonicity_adding_reason_never_lowers_level(self, demo_context):
        base = assess_risk("q", _profiles("SELECT name FROM products"), demo_context)
        assert base.level is RiskLevel.LOW
        richer = assess_risk(
            "q",
            _profiles("SELECT name FROM products", "DELETE FROM logs"),
            demo_context,
        )
        assert set(base.reasons) <= set(richer.reasons)
        assert richer.level is RiskLevel.HIGH

    def test_plan_steps_carry_statements(self):
        plan = self._drop_plan()
        assert plan.statements() == ["DROP TABLE logs"]
        assert plan.steps == [
            PlanStep(description="Execute: DROP TABLE logs", statement="DROP TABLE logs")
        ]
