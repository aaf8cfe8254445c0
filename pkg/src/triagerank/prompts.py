"""Canonical prompt catalog and template rendering.

Templates use ``{name}`` placeholders. Rendering substitutes every
placeholder in one pass (inserted text is never re-scanned), so a bound
render can leave no residual markers. Section headers like
``### Existing Patient:`` double as unique delimiters, keeping renders of
distinct message bindings distinct.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .corpus import EhrRecord, Message
from .errors import ConfigError, MissingBinding

CATALOG_VERSION = "1.0"

_PLACEHOLDER = re.compile(r"\{([a-z][a-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        seen: list[str] = []
        for match in _PLACEHOLDER.finditer(self.body):
            if match.group(1) not in seen:
                seen.append(match.group(1))
        return tuple(seen)


def render(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute all placeholders; raises MissingBinding on an unbound one."""
    for name in template.placeholders:
        if name not in bindings:
            raise MissingBinding(
                f"template {template.name!r} has unbound placeholder {name!r}",
                placeholder=name,
            )

    def _substitute(match: re.Match) -> str:
        return str(bindings[match.group(1)])

    return _PLACEHOLDER.sub(_substitute, template.body)


def format_ehr_block(ehr: EhrRecord | None) -> str:
    """Render an EHR record as a labeled block, or the not-available line."""
    if ehr is None:
        return "EHR: not available"
    return "\n".join(
        [
            "EHR:",
            "- Problem List: " + ("; ".join(ehr.problem_list) or "none"),
            "- Recent Diagnoses: " + ("; ".join(ehr.recent_diagnoses) or "none"),
            "- Active Medications: " + ("; ".join(ehr.active_medications) or "none"),
            f"- Demographics: age {ehr.age}, gender {ehr.gender.value}",
        ]
    )


def message_block(message: Message) -> str:
    """Message text with its EHR block appended when one is attached."""
    if message.ehr is None:
        return message.text
    return f"{message.text}\n{format_ehr_block(message.ehr)}"


def pair_bindings(existing: Message, new: Message) -> dict[str, str]:
    """Bindings for two-message templates: existing patient is slot 1."""
    return {
        "message_1": existing.text,
        "ehr_1": format_ehr_block(existing.ehr),
        "message_2": new.text,
        "ehr_2": format_ehr_block(new.ehr),
    }


def judge_bindings(a: Message, b: Message) -> dict[str, str]:
    """Bindings for the judge templates; both messages need responses."""
    from .errors import MissingResponse

    for message in (a, b):
        if message.clinician_response is None:
            raise MissingResponse(
                f"message {message.id!r} has no clinician response",
                message_id=message.id,
            )
    return {
        "message_1": a.text,
        "ehr_1": format_ehr_block(a.ehr),
        "response_1": a.clinician_response,
        "message_2": b.text,
        "ehr_2": format_ehr_block(b.ehr),
        "response_2": b.clinician_response,
    }


SYSTEM = PromptTemplate(
    "system",
    '### Role: You are a medical expert. You specialize in understanding the urgency of medical queries.\n'
    "\n"
    '### Definitions: Triage nurses can categorize patients into 1 / 6 categories, where 1 is "most urgent" and 6 is "least urgent".\n'
    "- Level 1 --> Patient has life-threatening issue that needs immediate attention.\n"
    "- Level 2 --> Patient has non life-threatening issue that would benefit from same-day treatment (e.g. urgent care)\n"
    "- Level 3 --> Patient should make an appointment with a doctor soon (1-3 days).\n"
    "- Level 4 --> Patient should see their doctor sometime in the near future (could be more than 3 days)\n"
    "- Level 5 --> Patient has symptoms that can be treated at home, and would benefit from a message instructing them on what to do.\n"
    "- Level 6 --> Patient presents something that is a non-issue and no further steps are needed.\n"
    "\n"
    "You can use this context to help think about which of two patients are more urgent.\n"
    "\n"
    "### Important Note: Patient messages may or may not be presented alongside structured EHR information such as medications, diagnoses, problem list, or demographics. These fields when available may contribute to medical urgency.\n"
    "\n"
    "### Relevant Context: Use the following information about medical urgency to help guide your response:\n"
    "- Patients who are more medically urgent will benefit more from priority medical care.\n"
    "- Sometimes, a patient may be lower urgency because they have already been seen by a physician for this exact issue very recently.\n"
    "- Sometimes, the patient writes a message in a tone which is more urgent than their actual medical issue. Medical urgency must be based on objective medical content, not tone. E.g. health anxiety is not medically urgent.\n"
    "- Sometimes, a patient with a more severe chronic issue may be less urgent than a patient with a less severe acute issue, as the chronic patient may not have a time-sensitive issue.\n"
    "- Consider the risk factors of each patient. Two patients with the same symptoms may have different needs based on demographics or prior diagnosis that make them higher risk patients.",
)

URGENT_SFT = PromptTemplate(
    "urgent_sft",
    "### CONTEXT ###\n"
    "\n"
    "You are a triage nurse who excels at determining the medical urgency of patient messages.\n"
    'There is a message already in your inbox from "Existing Patient".\n'
    "\n"
    'A new message from "New Patient" has just arrived.\n'
    "\n"
    "### Existing Patient: {message_1}\n"
    "{ehr_1}\n"
    "\n"
    "### New Patient: {message_2}\n"
    "{ehr_2}\n"
    "\n"
    '### Instruction: Your job is to answer the question "Is the new message from "New Patient" *more* medically urgent than the existing message from "Existing Patient"?\n'
    'If the answer is YES, then "New Patient" will be seen by a doctor first. If the answer is NO, "Existing Patient" will be seen first.\n'
    "\n"
    '### Response Format: Output "YES" or "NO" and nothing else.',
)

URGENT_REWARD = PromptTemplate(
    "urgent_reward",
    "### Instruction: You are provided with a patient message sent to a clinician.\n"
    "Your job is to generate a new patient message that is **more medically urgent** than the provided patient message.\n"
    "\n"
    "Output the **more urgent** patient message and nothing else.\n"
    "\n"
    "### Patient Message: {message}\n"
    "\n"
    "### More Urgent Patient Message:",
)

URGENT_REWARD_INVERSE = PromptTemplate(
    "urgent_reward_inverse",
    "### Instruction: You are provided with a patient message sent to a clinician.\n"
    "Your job is to generate a new patient message that is **less medically urgent** than the provided patient message.\n"
    "\n"
    "Output the **less urgent** patient message and nothing else.\n"
    "\n"
    "### Patient Message: {message}\n"
    "\n"
    "### Less Urgent Patient Message:",
)

_JUDGE_TASK = (
    "### Task: Two patients wrote to a clinician, and a clinical expert replied to each of them.\n"
    "Decide, from the expert responses alone, which patient was treated as more medically urgent.\n"
)

_JUDGE_INSTRUCTION = (
    '### Instruction: If the responses make it clear that Patient 1 is more urgent, answer "PATIENT 1".\n'
    'If they make it clear that Patient 2 is more urgent, answer "PATIENT 2".\n'
    'If the responses do not make the comparison clear, answer "UNCLEAR".\n'
    "\n"
    '### Response Format: Output "PATIENT 1", "PATIENT 2", or "UNCLEAR" and nothing else.'
)

_PATIENT_1_SECTION = (
    "### Patient 1 Message: {message_1}\n"
    "{ehr_1}\n"
    "\n"
    "### Expert Response to Patient 1: {response_1}\n"
)

_PATIENT_2_SECTION = (
    "### Patient 2 Message: {message_2}\n"
    "{ehr_2}\n"
    "\n"
    "### Expert Response to Patient 2: {response_2}\n"
)

# The two filtration passes differ only in patient presentation order.
JUDGE_V1 = PromptTemplate(
    "judge_v1",
    _JUDGE_TASK + "\n" + _PATIENT_1_SECTION + "\n" + _PATIENT_2_SECTION + "\n" + _JUDGE_INSTRUCTION,
)

JUDGE_V2 = PromptTemplate(
    "judge_v2",
    _JUDGE_TASK + "\n" + _PATIENT_2_SECTION + "\n" + _PATIENT_1_SECTION + "\n" + _JUDGE_INSTRUCTION,
)

RESPONSE_CLASSIFIER = PromptTemplate(
    "response_classifier",
    "### Task: A clinical expert replied to a patient message. Classify the expert response into exactly one urgency category based on what it instructs the patient to do.\n"
    "\n"
    "### Categories:\n"
    "- L1 --> Patient has life-threatening issue that needs immediate attention.\n"
    "- L2 --> Patient has non life-threatening issue that would benefit from same-day treatment (e.g. urgent care)\n"
    "- L3 --> Patient should make an appointment with a doctor soon (1-3 days).\n"
    "- L4 --> Patient should see their doctor sometime in the near future (could be more than 3 days)\n"
    "- L5 --> Patient has symptoms that can be treated at home, and would benefit from a message instructing them on what to do.\n"
    "- L6 --> Patient presents something that is a non-issue and no further steps are needed.\n"
    "- UNCLEAR --> The response does not cleanly fit into one of the categories above.\n"
    "- SUPPORTIVE_CARE --> The response suggests supportive care such as physical therapy or non-urgent mental health sessions.\n"
    "\n"
    "### Patient Message: {message_1}\n"
    "\n"
    "### Expert Response: {response_1}\n"
    "\n"
    "### Response Format: Output exactly one token from: L1, L2, L3, L4, L5, L6, UNCLEAR, SUPPORTIVE_CARE.",
)

CATALOG: dict[str, PromptTemplate] = {
    template.name: template
    for template in (
        SYSTEM,
        URGENT_SFT,
        URGENT_REWARD,
        URGENT_REWARD_INVERSE,
        JUDGE_V1,
        JUDGE_V2,
        RESPONSE_CLASSIFIER,
    )
}


def get_template(name: str) -> PromptTemplate:
    try:
        return CATALOG[name]
    except KeyError:
        raise ConfigError(f"unknown prompt template {name!r}") from None
