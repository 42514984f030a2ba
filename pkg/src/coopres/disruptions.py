"""Disruptive events: probabilistic apple vanishing and bot intrusions.

Events live on a declarative schedule; an engine fires them against the
world as the tick counter reaches their triggers and keeps a log of what
actually fired, which the metric pipeline later uses as its event list.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .world import AgentState, WorldState


class EventKind(Enum):
    APPLE_VANISH = "apple_vanish"
    BOT_INTRUSION = "bot_intrusion"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    trigger_tick: int
    v_s: float = 0.0        # apple_vanish: per-apple removal probability
    duration: int = 0       # bot_intrusion: ticks the bots stay
    bot_count: int = 0      # bot_intrusion: how many bots enter
    p_s: float = 1.0        # probability the event fires at its trigger

    def __post_init__(self):
        if self.trigger_tick < 0:
            raise ValueError("trigger tick must be >= 0")
        if not 0.0 <= self.p_s <= 1.0:
            raise ValueError("p_s must be in [0, 1]")
        if self.kind is EventKind.APPLE_VANISH:
            if not 0.0 <= self.v_s <= 1.0:
                raise ValueError("v_s must be in [0, 1]")
        else:
            if self.duration < 1:
                raise ValueError("bot intrusion duration must be >= 1")
            if self.bot_count < 0:
                raise ValueError("bot count must be >= 0")


@dataclass
class EventSchedule:
    events: list[Event] = field(default_factory=list)

    def __post_init__(self):
        triggers = [e.trigger_tick for e in self.events]
        for prev, cur in zip(triggers, triggers[1:]):
            if cur <= prev:
                raise ValueError("event triggers must be strictly increasing")

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def max_trigger(self) -> int:
        return max((e.trigger_tick for e in self.events), default=-1)


def parse_schedule(text: str) -> EventSchedule:
    """Parse the one-event-per-line schedule format.

    Lines: ``apple_vanish <trigger> <v_s> [p_s]`` or
    ``bot_intrusion <trigger> <duration> <bot_count> [p_s]``.
    Blank lines and ``#`` comments are ignored.
    """
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "apple_vanish":
                if len(parts) not in (3, 4):
                    raise ValueError("expected: apple_vanish <trigger> <v_s> [p_s]")
                events.append(Event(kind=EventKind.APPLE_VANISH,
                                    trigger_tick=int(parts[1]), v_s=float(parts[2]),
                                    p_s=float(parts[3]) if len(parts) == 4 else 1.0))
            elif kind == "bot_intrusion":
                if len(parts) not in (4, 5):
                    raise ValueError(
                        "expected: bot_intrusion <trigger> <duration> <bot_count> [p_s]")
                events.append(Event(kind=EventKind.BOT_INTRUSION,
                                    trigger_tick=int(parts[1]), duration=int(parts[2]),
                                    bot_count=int(parts[3]),
                                    p_s=float(parts[4]) if len(parts) == 5 else 1.0))
            else:
                raise ValueError(f"unknown event kind {kind!r}")
        except ValueError as exc:
            raise ValueError(f"schedule line {lineno}: {exc}") from None
    return EventSchedule(events=events)


def load_schedule(path: str | Path) -> EventSchedule:
    return parse_schedule(Path(path).read_text())


def apply_apple_vanish(state: WorldState, v_s: float, rng: random.Random) -> WorldState:
    """Remove each live apple with probability ``v_s``, sparing one per tree.

    Apples are visited in fixed cell order; the final live apple of each
    tree is exempt from the draw, so a tree never loses everything (and
    never vanishes) to this event.
    """
    if not 0.0 <= v_s <= 1.0:
        raise ValueError("v_s must be in [0, 1]")
    for tree in state.trees:
        if tree.vanished:
            continue
        live_cells = [cell for cell, alive in zip(tree.apple_cells, tree.alive) if alive]
        for cell in live_cells[:-1]:  # the last live cell is always spared
            if rng.random() < v_s:
                state.remove_apple(cell)
                state.total_event_vanished += 1
    return state


def apply_bot_intrusion(state: WorldState, event: Event, rng: random.Random) -> WorldState:
    """Spawn the event's bots at the free spawn cells nearest the map center."""
    center = (state.grid.height / 2.0, state.grid.width / 2.0)
    free = [c for c in state.grid.spawn_points if c not in state.occupied]
    free.sort(key=lambda c: ((c[0] - center[0]) ** 2 + (c[1] - center[1]) ** 2, c))
    if len(free) < event.bot_count:
        raise ValueError(
            f"bot intrusion needs {event.bot_count} free spawn cells, found {len(free)}")
    for i in range(event.bot_count):
        bot_id = state.next_agent_id
        state.next_agent_id += 1
        bot = AgentState(id=bot_id, position=free[i], is_bot=True)
        state.agents[bot_id] = bot
        state.occupied[free[i]] = bot_id
    return state


def remove_bots(state: WorldState, bot_ids: list[int]) -> WorldState:
    for bot_id in bot_ids:
        bot = state.agents.pop(bot_id, None)
        if bot is not None:
            del state.occupied[bot.position]
    return state


@dataclass
class FiredEvent:
    event: Event
    tick: int


class EventEngine:
    """Executes a schedule against a world, one tick at a time.

    Keeps the log of fired events (an event fires at its trigger with
    probability ``p_s``) and handles the delayed removal of intruding
    bots.  Bots exist exactly for ticks ``[trigger, trigger + duration)``.
    """

    def __init__(self, schedule: EventSchedule):
        self.schedule = schedule
        self.fired: list[FiredEvent] = []
        self._pending_removals: dict[int, list[int]] = {}  # tick -> bot ids

    def fired_triggers(self) -> list[int]:
        return [f.tick for f in self.fired]

    def fire_events(self, state: WorldState, tick: int, rng: random.Random) -> WorldState:
        for removal_tick in [t for t in self._pending_removals if t <= tick]:
            remove_bots(state, self._pending_removals.pop(removal_tick))
        for event in self.schedule:
            if event.trigger_tick != tick:
                continue
            if rng.random() >= event.p_s:
                continue
            if event.kind is EventKind.APPLE_VANISH:
                apply_apple_vanish(state, event.v_s, rng)
            else:
                if event.bot_count > 0:
                    before = set(state.agents)
                    apply_bot_intrusion(state, event, rng)
                    new_ids = sorted(set(state.agents) - before)
                    self._pending_removals.setdefault(
                        tick + event.duration, []).extend(new_ids)
            self.fired.append(FiredEvent(event=event, tick=tick))
        return state
