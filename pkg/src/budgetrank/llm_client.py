"""Prompt construction, HTTP transport, and response parsing for the
zero-shot annotation and performance-estimation paths.

The two prompt templates are fixed strings; builders only substitute the
bracketed placeholders, so identical inputs always yield byte-identical
prompts. Responses are untrusted: both parsers strip markdown fences and
validate shape and vocabulary before anything reaches the pipeline.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass

import requests

from .corpus import SectorTaxonomy
from .errors import (
    AuthMissing,
    EmptyExcerpt,
    EmptyTranscript,
    HttpStatus,
    NotANumber,
    NotJson,
    OutOfRange,
    Timeout,
    Transport,
    WrongShape,
)

log = logging.getLogger(__name__)

API_KEY_ENV = "BASIR_LLM_API_KEY"

EXTRACTION_TEMPLATE = """\
You are provided with the budget of India below. From this budget only pick up text segments relevant to the given list of industries.
List of industries: <list of industries>
Your output should be a json file having 2 keys: `text_segment' and `industry'. The value corresponding to `text_segment' would be the extract text segment extracted from the budget. The value of `industry' should be the corresponding list of industries from the given list that the text segment is related to. Return only the segments having any relation with the given list of industries. One text segment can be related to multiple industries.

Text context from Budget: <Budget Transcript of a given year>"""

PERF_TEMPLATE = (
    "You are a financial expert with extensive experience of analysing Indian "
    "Budgets. Given a sector and an excerpts related to the sector from a budget "
    "speech, estimate the performance of the sector. You output should be just a "
    "real number between -1 to 1. Don't reply anything else. "
    "Sector: <name of sector>, Excerpt: <text excerpts related to the given sector>"
)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key: str
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 0.5

    def __post_init__(self):
        if self.timeout <= 0 or self.max_retries < 0:
            raise ValueError("timeout must be > 0 and max_retries >= 0")


@dataclass(frozen=True)
class ExtractionRecord:
    text_segment: str
    industry: tuple[str, ...]


@dataclass(frozen=True)
class PerfEstimate:
    sector: str
    value: float


def config_from_env(base_url: str, model_name: str, timeout: float = 60.0,
                    max_retries: int = 3) -> EndpointConfig:
    key = os.environ.get(API_KEY_ENV, "")
    if not key:
        raise AuthMissing(f"environment variable {API_KEY_ENV} is not set")
    return EndpointConfig(base_url, model_name, key, timeout, max_retries)


def build_extraction_prompt(transcript: str, taxonomy: SectorTaxonomy) -> str:
    if not transcript.strip():
        raise EmptyTranscript("budget transcript is empty")
    industries = ", ".join(taxonomy.sectors)
    prompt = EXTRACTION_TEMPLATE.replace("<list of industries>", industries)
    return prompt.replace("<Budget Transcript of a given year>", transcript)


def build_perf_prompt(sector: str, excerpt: str) -> str:
    if not excerpt.strip():
        raise EmptyExcerpt("sector excerpt is empty")
    prompt = PERF_TEMPLATE.replace("<name of sector>", sector)
    return prompt.replace("<text excerpts related to the given sector>", excerpt)


def strip_fences(text: str) -> str:
    """Remove one enclosing markdown code fence (with optional language tag)."""
    s = text.strip()
    if not s.startswith("```"):
        return s
    lines = s.splitlines()
    if len(lines) >= 2 and lines[-1].strip() == "```":
        lines = lines[1:-1]
    else:
        lines = lines[1:]
    return "\n".join(lines).strip()


def parse_extraction_response(text: str, taxonomy: SectorTaxonomy):
    """Returns (records, rejects): records keep only taxonomy sector names,
    rejects lists every unknown name encountered, in response order."""
    try:
        data = json.loads(strip_fences(text))
    except json.JSONDecodeError as exc:
        raise NotJson(f"response is not JSON: {exc}")
    if not isinstance(data, list):
        raise WrongShape(f"expected a JSON array, got {type(data).__name__}")
    records: list[ExtractionRecord] = []
    rejects: list[str] = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or set(item) != {"text_segment", "industry"}:
            raise WrongShape(
                f"item {i}: expected exactly the keys 'text_segment' and 'industry'")
        segment = item["text_segment"]
        industries = item["industry"]
        if not isinstance(segment, str) or not segment.strip():
            raise WrongShape(f"item {i}: text_segment must be a non-empty string")
        if not isinstance(industries, list) or not all(isinstance(s, str) for s in industries):
            raise WrongShape(f"item {i}: industry must be a list of strings")
        kept = []
        for name in industries:
            if name in taxonomy:
                kept.append(name)
            else:
                rejects.append(name)
        records.append(ExtractionRecord(segment, tuple(kept)))
    return records, rejects


def parse_perf_response(text: str) -> float:
    s = strip_fences(text)
    try:
        value = float(s)
    except ValueError:
        raise NotANumber(f"expected a single real number, got {text!r}")
    if not math.isfinite(value):
        raise NotANumber(f"expected a finite number, got {text!r}")
    if not -1.0 <= value <= 1.0:
        raise OutOfRange(f"{value} outside [-1, 1]")
    return value


def request(config: EndpointConfig, prompt: str) -> str:
    """POST one user message to {base_url}/chat/completions and return the
    first choice's message content. Transport errors and 5xx responses are
    retried with exponential backoff up to max_retries; 4xx are not."""
    if not config.api_key:
        raise AuthMissing("no API key configured")
    url = config.base_url.rstrip("/") + "/chat/completions"
    body = {
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
    }
    headers = {"Authorization": f"Bearer {config.api_key}"}
    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            time.sleep(config.backoff * 2 ** (attempt - 1))
        try:
            resp = requests.post(url, json=body, headers=headers,
                                 timeout=config.timeout)
        except requests.Timeout as exc:
            last_error = Timeout(f"request timed out after {config.timeout}s")
            log.warning("attempt %d/%d: %s", attempt + 1, config.max_retries + 1, exc)
            continue
        except requests.RequestException as exc:
            last_error = Transport(str(exc))
            log.warning("attempt %d/%d: %s", attempt + 1, config.max_retries + 1, exc)
            continue
        if resp.status_code >= 500:
            last_error = HttpStatus(resp.status_code, resp.text[:200])
            log.warning("attempt %d/%d: server returned %d",
                        attempt + 1, config.max_retries + 1, resp.status_code)
            continue
        if resp.status_code != 200:
            raise HttpStatus(resp.status_code, resp.text[:200])
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise WrongShape("response missing choices[0].message.content")
        if not isinstance(content, str):
            raise WrongShape("message content is not a string")
        return content
    assert last_error is not None
    raise last_error


def estimate_performance(config: EndpointConfig, sector: str,
                         excerpt: str) -> PerfEstimate:
    """One build-request-parse round trip for a (sector, excerpt) pair."""
    reply = request(config, build_perf_prompt(sector, excerpt))
    return PerfEstimate(sector, parse_perf_response(reply))
