#!/usr/bin/env python3
"""Regenerate the bundled word vectors and generation tables.

The ~50 words that drive matching decisions (entity names and the location
phrases the tables use) get exactly orthonormal vectors, so unrelated names
can never cross the matching threshold by accident; relatedness is carried by
shared words in multiword phrases and by the generation tables.  The rest of
the ~1k vocabulary is random unit vectors.  Deterministic: fixed seed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parents[1]
ASSET_DIR = REPO / "src" / "objsearch" / "assets"
DIM = 50
SEED = 20240521

# Words that participate in matching decisions: target names, landmark names,
# and every content word the generation tables may use.
CORE_WORDS = [
    # target-object words
    "book", "cup", "laptop", "cellphone", "remote", "control", "alarm",
    "clock", "bowl", "pillow", "teddy", "bear", "spray", "bottle",
    # landmark words
    "tv", "monitor", "sofa", "dining", "table", "armchair", "side",
    "coffee", "desk", "bed", "drawer",
    # location words used by the generation tables
    "kitchen", "cupboard", "shelf", "library", "nightstand", "office",
    "bedroom", "sink", "cabinet", "counter", "school", "bag", "living",
    "room", "closet", "garage", "store", "classroom", "blanket", "crib",
    "cleaning", "bathroom", "charger",
]

FILLER_BASE = """
a photo of background road scene house animal fashion accessory transport
traffic sign home appliance food sport equipment furniture supplies
electronics kitchenware apple banana orange grape lemon melon peach pear
plum cherry bread butter cheese milk egg sugar salt pepper rice pasta soup
salad meat chicken fish beef pork lamb sauce cream honey jam tea juice water
soda wine beer plate fork knife spoon pan lid tray jug mug glass pitcher
kettle toaster oven stove fridge freezer mixer blender grater whisk ladle
apron towel napkin sponge soap brush broom mop bucket vacuum duster basket
hamper bin lamp light bulb candle torch lantern chandelier switch outlet
cord cable plug battery wire fuse fan heater radiator vent chimney fireplace
window door gate fence wall floor ceiling roof stair step railing porch
balcony terrace garden yard lawn hedge flower tree bush grass leaf branch
root seed soil stone rock gravel sand clay brick tile plank beam nail screw
bolt nut hammer wrench pliers saw drill file chisel level ruler tape glue
paint varnish ladder cart wheel axle pump hose pipe valve tank drain gutter
chair stool bench couch ottoman futon mattress headboard quilt duvet sheet
curtain blind rug carpet mat mirror frame picture painting poster photograph
sculpture vase bookcase wardrobe dresser chest trunk safe locker rack hook
hanger peg box crate carton jar tin can pouch sack purse wallet backpack
suitcase luggage umbrella coat jacket sweater shirt trousers jeans skirt
dress sock shoe boot sandal slipper glove scarf hat cap belt tie button
zipper pocket collar sleeve fabric cotton wool silk leather denim velvet
computer keyboard mouse screen printer scanner router modem tablet phone
camera speaker headphone microphone radio television console controller
joystick disc tape antenna satellite projector calculator typewriter pen
pencil marker crayon eraser sharpener notebook journal diary folder binder
envelope stamp letter card paper scissors stapler clip pin tack board chalk
ink desk lamp organizer calendar planner map globe atlas dictionary novel
magazine newspaper comic manual guide recipe ticket receipt coin bill money
dog cat bird fish hamster rabbit mouse horse cow sheep goat pig duck goose
hen rooster owl eagle hawk crow robin sparrow pigeon parrot turtle frog
snake lizard spider ant bee wasp fly moth butterfly worm snail crab lobster
shrimp whale dolphin shark seal otter beaver fox wolf deer moose elk bison
squirrel raccoon skunk bat mole hedgehog city town village street avenue
lane alley highway bridge tunnel station airport harbor port dock pier
market mall shop bakery cafe restaurant hotel hospital clinic pharmacy bank
museum theater cinema stadium gym pool park playground zoo farm barn silo
mill factory warehouse depot plant lab studio gallery church temple tower
castle palace cottage cabin hut tent igloo run walk jump climb crawl swim
dive fly drive ride sail row push pull lift carry throw catch kick roll
slide spin turn twist bend stretch reach grab hold drop place put set lay
hang fold wrap tear cut chop slice peel stir pour fill empty wash rinse dry
wipe clean dust sweep scrub polish iron sew knit weave mend fix build make
break open close lock unlock press squeeze shake wave point nod look watch
listen hear smell taste touch feel think know learn teach read write draw
paint sing dance play rest sleep wake eat drink cook bake boil fry roast
grill steam soft hard smooth rough warm cold hot cool wet dry big small
large tiny huge giant wide narrow thick thin long short tall low high deep
shallow heavy light fast slow quick quiet loud bright dark pale vivid clear
cloudy sunny rainy snowy windy foggy fresh stale clean dirty neat messy old
new young ancient modern early late round square flat curved sharp blunt
red blue green yellow purple pink brown black white gray silver gold beige
maroon navy teal olive coral ivory amber bronze copper crimson scarlet
north south east west left right front back top bottom middle center corner
edge inside outside above below near far here there morning noon evening
night today tomorrow yesterday week month year season spring summer autumn
winter minute hour second moment head face eye ear nose mouth lip tooth
tongue chin cheek neck shoulder arm elbow wrist hand finger thumb nail
chest waist hip leg knee ankle foot toe heel skin hair beard one two three
four five six seven eight nine ten dozen pair couple few many much more
most less least all none some any every each
"""


def filler_words() -> list[str]:
    words: list[str] = []
    for word in FILLER_BASE.split():
        w = word.lower()
        if w not in words:
            words.append(w)
    # Plural variants pad the vocabulary toward ~1k entries.
    plurals = [w + "s" for w in words if not w.endswith("s") and len(w) > 2]
    for p in plurals:
        if p not in words:
            words.append(p)
        if len(words) >= 1000 - len(CORE_WORDS):
            break
    return words


GENERATIONS = {
    "book": [
        "desk", "book shelf", "library", "side table", "school bag",
        "bed", "drawer", "office desk", "nightstand", "classroom",
        "living room", "book store",
    ],
    "cup": [
        "kitchen", "dining table", "cupboard", "sink", "coffee table",
        "counter", "desk", "office", "cabinet", "shelf",
    ],
    "laptop": [
        "desk", "office", "dining table", "sofa", "bag", "coffee table",
        "bed", "school", "library", "living room",
    ],
    "cellphone": [
        "desk", "side table", "sofa", "bed", "charger",
        "counter", "nightstand", "coffee table", "bag",
    ],
    "remote control": [
        "sofa", "coffee table", "tv monitor", "armchair", "side table",
        "living room", "bed", "drawer",
    ],
    "alarm clock": [
        "nightstand", "side table", "bed", "drawer", "desk",
        "bedroom", "shelf", "bedroom shelf",
    ],
    "bowl": [
        "kitchen", "dining table", "cupboard", "sink", "cabinet",
        "counter", "shelf", "coffee table",
    ],
    "pillow": [
        "bed", "sofa", "armchair", "bedroom", "closet",
        "living room", "crib", "blanket closet",
    ],
    "teddy bear": [
        "bed", "crib", "armchair", "shelf", "bedroom",
        "closet", "drawer",
    ],
    "spray bottle": [
        "sink", "cupboard", "cabinet", "garage", "cleaning closet",
        "counter", "drawer", "bathroom",
    ],
}

# Alternative table emulating a coarser web-mined prior: generic "table"
# entries smear mass over every table-like landmark, and a few hosts from
# the curated table are missing or demoted.
GENERATIONS_WEB = {
    "book": ["library", "book store", "shelf", "school", "table", "desk"],
    "cup": ["kitchen", "table", "sink", "store", "shelf"],
    "laptop": ["office", "desk", "table", "bag", "store"],
    "cellphone": ["bag", "table", "store", "charger", "desk"],
    "remote control": ["table", "sofa", "living room", "drawer", "store"],
    "alarm clock": ["bedroom", "table", "store", "shelf", "desk"],
    "bowl": ["kitchen", "table", "cupboard", "store", "sink"],
    "pillow": ["bed", "store", "sofa", "bedroom", "closet"],
    "teddy bear": ["store", "bed", "crib", "shelf", "closet"],
    "spray bottle": ["store", "sink", "garage", "kitchen", "cabinet"],
}


def table_words(*tables: dict) -> set[str]:
    words: set[str] = set()
    for table in tables:
        for target, gens in table.items():
            words.update(target.lower().split())
            for g in gens:
                words.update(g.lower().split())
    return words


def main() -> int:
    rng = np.random.default_rng(SEED)
    core = list(dict.fromkeys(CORE_WORDS))
    stray = table_words(GENERATIONS, GENERATIONS_WEB) - set(core)
    if stray:
        print(f"generation tables use non-core words: {sorted(stray)}", file=sys.stderr)
        return 1
    if len(core) > DIM:
        print(f"core vocabulary {len(core)} exceeds dimension {DIM}", file=sys.stderr)
        return 1
    gauss = rng.standard_normal((DIM, len(core)))
    q, _ = np.linalg.qr(gauss)
    vectors: dict[str, np.ndarray] = {w: q[:, i] for i, w in enumerate(core)}

    for word in filler_words():
        if word in vectors:
            continue
        v = rng.standard_normal(DIM)
        vectors[word] = v / np.linalg.norm(v)

    ASSET_DIR.mkdir(parents=True, exist_ok=True)
    lines = []
    for word in sorted(vectors):
        lines.append(word + " " + " ".join(f"{v:.6f}" for v in vectors[word]))
    (ASSET_DIR / "word_vectors.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (ASSET_DIR / "generations.json").write_text(
        json.dumps(GENERATIONS, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (ASSET_DIR / "generations_web.json").write_text(
        json.dumps(GENERATIONS_WEB, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"vocabulary: {len(vectors)} words, dim {DIM}")
    print(f"core (orthonormal): {len(core)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
