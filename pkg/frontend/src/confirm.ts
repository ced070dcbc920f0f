/** Plan-confirmation modal state machine.
 *
 * The server drives the protocol: a plan_proposal event carries the steps
 * and warnings, each confirmation_request opens one modal, and destructive
 * plans produce two separate requests, so approving them takes two distinct
 * confirm actions. The confirm button's payload is exactly one standardized
 * approval string; anything else would not advance the plan.
 */

import type { AgentEvent, PlanStepPayload } from "./types.js";

export const APPROVAL_REPLY = "yes";
export const CANCEL_REPLY = "no";

export interface ModalView {
  planId: string;
  prompt: string;
  steps: PlanStepPayload[];
  warnings: string[];
  stage: number; // 1-based confirmation being asked for
  totalStages: number;
}

export class ConfirmationController {
  private plan: {
    planId: string;
    steps: PlanStepPayload[];
    warnings: string[];
    required: number;
  } | null = null;
  private modal: ModalView | null = null;
  private approvalsSent = 0;

  constructor(private readonly send: (text: string) => Promise<unknown>) {}

  observe(event: AgentEvent): void {
    if (event.type === "plan_proposal") {
      this.plan = {
        planId: String(event.body.plan_id ?? ""),
        steps: (event.body.steps ?? []) as PlanStepPayload[],
        warnings: (event.body.warnings ?? []) as string[],
        required: Number(event.body.confirmations_required ?? 1),
      };
      this.approvalsSent = 0;
      return;
    }
    if (event.type === "confirmation_request" && this.plan) {
      this.modal = {
        planId: this.plan.planId,
        prompt: String(event.body.text ?? ""),
        steps: this.plan.steps,
        warnings: this.plan.warnings,
        stage: Number(event.body.sequence ?? this.approvalsSent + 1),
        totalStages: this.plan.required,
      };
      return;
    }
    if (event.type === "answer" || event.type === "error") {
      this.plan = null;
      this.modal = null;
    }
  }

  /** The open modal, or null when no confirmation is pending. */
  currentModal(): ModalView | null {
    return this.modal;
  }

  get isDestructive(): boolean {
    return (this.plan?.required ?? 0) >= 2;
  }

  /** One confirm action: closes the modal and sends exactly the
   * standardized approval. A destructive plan will reopen the modal with the
   * next confirmation_request; confirming it is a second, separate action. */
  async confirm(): Promise<void> {
    if (!this.modal) throw new Error("no confirmation is pending");
    this.modal = null;
    this.approvalsSent += 1;
    await this.send(APPROVAL_REPLY);
  }

  async cancel(): Promise<void> {
    if (!this.modal) throw new Error("no confirmation is pending");
    this.modal = null;
    this.plan = null;
    await this.send(CANCEL_REPLY);
  }
}
