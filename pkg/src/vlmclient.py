"""
Live perception through a chat-completion endpoint: the system prompt, semicolon-joined questions
and an optional camera image go out, one "yes;no;skip" style line comes back.
"""

import asyncio
import base64
import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence

import aiohttp

from src import settings
from src.errors import ConfigurationError, MalformedResponseError, VLMAuthError, VLMError, VLMTransportError
from src.pddl import GroundAction
from src.perception import AnswerValue, Question, QuestionBank, affordance_question, default_bank, success_question
from src.prompt import SYSTEM_PROMPT, humanize, scene_digest_template

logger = logging.getLogger(__name__)

SEPARATOR = ";"
_TOKENS = {a.value: a for a in AnswerValue}


class PromptPayload(NamedTuple):
    system_text: str
    questions: tuple
    image: Optional[bytes] = None
    media_type: str = "image/png"
    context: Optional[str] = None  # scene digest sent instead of an image

    @property
    def user_text(self) -> str:
        return SEPARATOR.join(self.questions)


@dataclass(frozen=True)
class ClientConfig:
    endpoint: str = settings.VLM_ENDPOINT
    model: str = settings.VLM_MODEL
    api_key_env: str = settings.VLM_API_KEY_ENV  # name of the variable, never the key
    timeout: float = settings.VLM_TIMEOUT
    retries: int = settings.VLM_RETRIES
    backoff: float = settings.VLM_BACKOFF
    min_interval: float = settings.VLM_MIN_INTERVAL

    def __post_init__(self):
        if not self.endpoint or not self.model:
            raise ConfigurationError("VLM endpoint and model must be set")
        if self.retries < 0 or self.timeout <= 0 or self.backoff < 0 or self.min_interval < 0:
            raise ConfigurationError("VLM retries, timeout, backoff and min_interval must be non-negative")

    def api_key(self) -> str:
        key = os.getenv(self.api_key_env, "").strip()
        if not key:
            raise VLMAuthError(f"environment variable {self.api_key_env} is not set")
        return key


def build_prompt(questions: Iterable[str], image: Optional[bytes] = None, media_type: str = "image/png", context: Optional[str] = None) -> PromptPayload:
    questions = tuple(questions)
    if not questions:
        raise ValueError("build_prompt needs at least one question")
    return PromptPayload(SYSTEM_PROMPT, questions, image, media_type, context)


def render_answers(answers: Sequence[AnswerValue]) -> str:
    return SEPARATOR.join(a.value for a in answers)


def parse_answers(text: str, expected_count: int) -> List[AnswerValue]:
    if expected_count < 1:
        raise ValueError("expected_count must be at least 1")
    tokens = [t.strip().lower() for t in text.strip().split(SEPARATOR)]
    if len(tokens) != expected_count:
        raise MalformedResponseError(f"expected {expected_count} answers, got {len(tokens)}", text)
    unknown = [t for t in tokens if t not in _TOKENS]
    if unknown:
        raise MalformedResponseError(f"unrecognized answer token(s) {unknown}", text)
    return [_TOKENS[t] for t in tokens]


def request_body(cfg: ClientConfig, payload: PromptPayload) -> Dict:
    content = [{"type": "text", "text": payload.user_text}]
    if payload.context:
        content.insert(0, {"type": "text", "text": payload.context})
    if payload.image is not None:
        data = base64.b64encode(payload.image).decode("ascii")
        content.append({"type": "image_url", "image_url": {"url": f"data:{payload.media_type};base64,{data}"}})
    return {
        "model": cfg.model,
        "temperature": 0,
        "messages": [
            {"role": "system", "content": payload.system_text},
            {"role": "user", "content": content},
        ],
    }


def _redacted(body: Dict, payload: PromptPayload) -> Dict:
    """Copy of `body` fit for the debug log: the image becomes its size."""
    user = body["messages"][1]
    parts = [p if p["type"] != "image_url" else {"type": "image_url", "image_url": f"<{len(payload.image)} bytes>"} for p in user["content"]]
    return {**body, "messages": [body["messages"][0], {**user, "content": parts}]}


def _content(data) -> str:
    try:
        return data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise MalformedResponseError("response has no choices[0].message.content", str(data)) from None


class RateLimiter:
    """Spaces request starts at least `min_interval` seconds apart, across threads."""

    def __init__(self, min_interval: float = 0.0):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._next = 0.0

    def reserve(self) -> float:
        """Seconds the caller should wait before sending."""
        if self.min_interval <= 0:
            return 0.0
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next)
            self._next = start + self.min_interval
            return start - now


_limiters: Dict[float, RateLimiter] = {}


def _limiter(cfg: ClientConfig) -> RateLimiter:
    if cfg.min_interval not in _limiters:
        _limiters[cfg.min_interval] = RateLimiter(cfg.min_interval)
    return _limiters[cfg.min_interval]


async def _post_once(session: aiohttp.ClientSession, cfg: ClientConfig, body: Dict, headers: Dict, expected: int) -> List[AnswerValue]:
    async with session.post(cfg.endpoint, json=body, headers=headers) as response:
        text = await response.text()
        if response.status in (401, 403):
            raise VLMAuthError(f"endpoint refused the credential in {cfg.api_key_env} (HTTP {response.status})")
        if response.status == 429 or response.status >= 500:
            raise VLMTransportError(f"HTTP {response.status} from {cfg.endpoint}")
        if response.status >= 400:
            raise VLMError(f"HTTP {response.status} from {cfg.endpoint}: {text[:200]}")
        try:
            data = await response.json(content_type=None)
        except ValueError:
            raise MalformedResponseError("response body is not JSON", text) from None
    answer_text = _content(data)
    logger.debug("VLM answered %r", answer_text)
    return parse_answers(answer_text, expected)


async def aquery(cfg: ClientConfig, payload: PromptPayload, session: Optional[aiohttp.ClientSession] = None) -> List[AnswerValue]:
    """One query round. Transient failures and malformed answers are retried with exponential backoff."""
    body = request_body(cfg, payload)
    headers = {"Authorization": f"Bearer {cfg.api_key()}"}
    logger.debug("VLM request %s", _redacted(body, payload))
    delay = _limiter(cfg).reserve()
    if delay:
        await asyncio.sleep(delay)
    own_session = session is None
    if own_session:
        session = aiohttp.ClientSession(timeout=aiohttp.ClientTimeout(total=cfg.timeout))
    try:
        last_error: Optional[VLMError] = None
        for attempt in range(cfg.retries + 1):
            if attempt:
                wait = cfg.backoff * 2 ** (attempt - 1)
                logger.info("retrying VLM query in %.1fs after: %s", wait, last_error)
                await asyncio.sleep(wait)
            try:
                return await _post_once(session, cfg, body, headers, len(payload.questions))
            except (VLMTransportError, MalformedResponseError) as e:
                last_error = e
            except (aiohttp.ClientError, asyncio.TimeoutError) as e:
                last_error = VLMTransportError(f"{type(e).__name__} talking to {cfg.endpoint}: {e}")
        raise last_error
    finally:
        if own_session:
            await session.close()


def query(cfg: ClientConfig, payload: PromptPayload) -> List[AnswerValue]:
    return asyncio.run(aquery(cfg, payload))


def scene_digest(world, bank: Optional[QuestionBank] = None) -> str:
    """Text stand-in for a camera frame: the vision-class facts true in `world`."""
    bank = bank or default_bank()
    facts = sorted(a for a in world.truth if bank.is_vision(a.predicate))
    lines = [f"- {a.predicate}({', '.join(humanize(x) for x in a.args)})" for a in facts]
    return scene_digest_template.format(facts="\n".join(lines) or "- nothing")


class VLMPerceiver:
    """Perceiver backed by a live model. A batch that stays malformed after retries is read as all Skip."""

    def __init__(self, cfg: Optional[ClientConfig] = None, bank: Optional[QuestionBank] = None, camera: Optional[Callable[[object], bytes]] = None, digest: bool = False):
        self.cfg = cfg or ClientConfig()
        self.bank = bank or default_bank()
        self.camera = camera
        self.digest = digest
        self.queries = 0

    def _ask_texts(self, world, texts: Sequence[str]) -> List[AnswerValue]:
        image = self.camera(world) if self.camera is not None else None
        context = scene_digest(world, self.bank) if self.digest and image is None else None
        payload = build_prompt(texts, image=image, context=context)
        self.queries += len(texts)
        try:
            return query(self.cfg, payload)
        except MalformedResponseError as e:
            logger.warning("treating %d answers as skip: %s", len(texts), e)
            return [AnswerValue.SKIP] * len(texts)

    def ask(self, world, questions: Iterable[Question]) -> List[AnswerValue]:
        questions = list(questions)
        if not questions:
            return []
        return self._ask_texts(world, [q.text for q in questions])

    def ask_success(self, world_before, world_after, action: GroundAction) -> AnswerValue:
        return self._ask_texts(world_after, [success_question(action)])[0]

    def ask_affordance(self, world, action: GroundAction) -> AnswerValue:
        return self._ask_texts(world, [affordance_question(action)])[0]
