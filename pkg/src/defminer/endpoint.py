"""HTTP client for the optional external classifier / embedding service."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import requests

from .errors import EndpointError

logger = logging.getLogger(__name__)

API_KEY_ENV = "DEFMINER_CLASSIFIER_KEY"

# Shipped default; not transmitted on the wire. A self-hosted service can
# read it from the run config to build its own prompt.
DEFAULT_PROMPT = (
    "Decide whether the following sentence is a complete definition of the "
    "target term. Answer with a label 'complete' or 'incomplete' and a "
    "confidence. Sentence: {sentence}"
)


@dataclass(frozen=True)
class ClassifierEndpoint:
    """Configuration for the external service. Disabled endpoints are
    never contacted."""

    url: str = ""
    timeout: float = 10.0
    prompt_template: str = DEFAULT_PROMPT
    enabled: bool = False


def post_json(ep: ClassifierEndpoint, payload: dict) -> dict:
    """POST a JSON payload and return the parsed JSON object.

    Raises EndpointError on any transport, HTTP, or parse failure.
    Never called for disabled endpoints.
    """
    if not ep.enabled:
        raise EndpointError("endpoint is disabled")
    headers = {}
    key = os.environ.get(API_KEY_ENV)
    if key:
        headers["Authorization"] = f"Bearer {key}"
    try:
        resp = requests.post(ep.url, json=payload, timeout=ep.timeout, headers=headers)
        resp.raise_for_status()
        body = resp.json()
    except requests.RequestException as exc:
        raise EndpointError(f"endpoint request failed: {exc}") from exc
    except ValueError as exc:
        raise EndpointError(f"endpoint returned unparsable body: {exc}") from exc
    if not isinstance(body, dict):
        raise EndpointError("endpoint response is not a JSON object")
    return body
