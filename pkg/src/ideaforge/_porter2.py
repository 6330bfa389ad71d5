"""English (Porter2 / Snowball) suffix-stripping stemmer.

Pure-Python, no external data. The region offsets R1/R2 are computed once
on the prepared word and kept as fixed positions while suffixes are
rewritten, matching the reference automaton's behaviour.
"""

from __future__ import annotations

_VOWELS = frozenset("aeiouy")
_DOUBLES = ("bb", "dd", "ff", "gg", "mm", "nn", "pp", "rr", "tt")
_LI_ENDINGS = frozenset("cdeghkmnrt")

# Whole-word exceptional forms, applied before any step.
_EXCEPTIONS = {
    "skis": "ski", "skies": "sky",
    "dying": "die", "lying": "lie", "tying": "tie",
    "idly": "idl", "gently": "gentl", "ugly": "ugli",
    "early": "earli", "only": "onli", "singly": "singl",
    "sky": "sky", "news": "news", "howe": "howe",
    "atlas": "atlas", "cosmos": "cosmos", "bias": "bias", "andes": "andes",
}

# Words left alone once step 1a has run.
_EXCEPTIONS_POST_1A = frozenset({
    "inning", "outing", "canning", "herring", "earring",
    "proceed", "exceed", "succeed",
})

_SPECIAL_R1_PREFIXES = ("gener", "commun", "arsen")

# Step 2/3/4 suffix tables, longest first so the first match wins
# (no fallback to a shorter suffix once a longer one matched).
_STEP2 = (
    ("ization", "ize"), ("ational", "ate"), ("fulness", "ful"),
    ("ousness", "ous"), ("iveness", "ive"), ("tional", "tion"),
    ("biliti", "ble"), ("lessli", "less"), ("entli", "ent"),
    ("ation", "ate"), ("alism", "al"), ("aliti", "al"), ("ousli", "ous"),
    ("iviti", "ive"), ("fulli", "ful"), ("enci", "ence"), ("anci", "ance"),
    ("abli", "able"), ("izer", "ize"), ("ator", "ate"), ("alli", "al"),
    ("bli", "ble"), ("ogi", "og"), ("li", ""),
)
_STEP3 = (
    ("ational", "ate"), ("tional", "tion"), ("alize", "al"),
    ("icate", "ic"), ("iciti", "ic"), ("ative", ""), ("ical", "ic"),
    ("ness", ""), ("ful", ""),
)
_STEP4 = (
    "ement", "ance", "ence", "able", "ible", "ment",
    "ant", "ent", "ism", "ate", "iti", "ous", "ive", "ize",
    "ion", "al", "er", "ic",
)


def _is_vowel(ch: str) -> bool:
    # the uppercase Y marker counts as a consonant
    return ch in _VOWELS


def _mark_regions(word: str) -> tuple[int, int]:
    n = len(word)
    r1 = n
    for prefix in _SPECIAL_R1_PREFIXES:
        if word.startswith(prefix):
            r1 = len(prefix)
            break
    else:
        for i in range(1, n):
            if not _is_vowel(word[i]) and _is_vowel(word[i - 1]):
                r1 = i + 1
                break
    r2 = n
    for i in range(r1 + 1, n):
        if not _is_vowel(word[i]) and _is_vowel(word[i - 1]):
            r2 = i + 1
            break
    return r1, r2


def _ends_in_short_syllable(word: str) -> bool:
    n = len(word)
    if n == 2:
        return _is_vowel(word[0]) and not _is_vowel(word[1])
    if n >= 3:
        # non-vowel, vowel, non-vowel not in {w, x, Y}
        return (not _is_vowel(word[-3]) and _is_vowel(word[-2])
                and not _is_vowel(word[-1]) and word[-1] not in "wxY")
    return False


def _contains_vowel(part: str) -> bool:
    return any(_is_vowel(ch) for ch in part)


def stem(word: str) -> str:
    """Stem one lowercase word. Inputs of length <= 2 pass through."""
    if word.startswith("'"):
        word = word[1:]
    if len(word) <= 2:
        return word
    if word in _EXCEPTIONS:
        return _EXCEPTIONS[word]

    # mark consonant-y: word-initial y, or y right after a vowel
    chars = list(word)
    if chars[0] == "y":
        chars[0] = "Y"
    for i in range(1, len(chars)):
        if chars[i] == "y" and _is_vowel(chars[i - 1]):
            chars[i] = "Y"
    word = "".join(chars)

    r1, r2 = _mark_regions(word)

    # step 0: possessive endings
    for suf in ("'s'", "'s", "'"):
        if word.endswith(suf):
            word = word[: -len(suf)]
            break

    # step 1a
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ied") or word.endswith("ies"):
        word = word[:-2] if len(word) > 4 else word[:-1]
    elif word.endswith("ss") or word.endswith("us"):
        pass
    elif word.endswith("s"):
        if _contains_vowel(word[:-2]):
            word = word[:-1]

    if word in _EXCEPTIONS_POST_1A:
        return word

    # step 1b
    suffix = next((s for s in ("eedly", "ingly", "edly", "ing", "eed", "ed")
                   if word.endswith(s)), None)
    if suffix in ("eed", "eedly"):
        if len(word) - len(suffix) >= r1:
            word = word[: -len(suffix)] + "ee"
    elif suffix is not None:
        stem_part = word[: -len(suffix)]
        if _contains_vowel(stem_part):
            word = stem_part
            if word.endswith(("at", "bl", "iz")):
                word += "e"
            elif word.endswith(_DOUBLES):
                word = word[:-1]
            elif r1 >= len(word) and _ends_in_short_syllable(word):
                word += "e"

    # step 1c
    if (len(word) > 2 and word[-1] in "yY"
            and not _is_vowel(word[-2])):
        word = word[:-1] + "i"

    # step 2
    for suf, repl in _STEP2:
        if word.endswith(suf):
            if len(word) - len(suf) >= r1:
                if suf == "ogi":
                    if word[-4:-3] == "l":
                        word = word[:-3] + repl
                elif suf == "li":
                    if word[-3:-2] in _LI_ENDINGS:
                        word = word[:-2]
                else:
                    word = word[: -len(suf)] + repl
            break

    # step 3
    for suf, repl in _STEP3:
        if word.endswith(suf):
            if len(word) - len(suf) >= r1:
                if suf == "ative":
                    if len(word) - len(suf) >= r2:
                        word = word[:-5]
                else:
                    word = word[: -len(suf)] + repl
            break

    # step 4
    for suf in _STEP4:
        if word.endswith(suf):
            if len(word) - len(suf) >= r2:
                if suf == "ion":
                    if word[-4:-3] in ("s", "t"):
                        word = word[:-3]
                else:
                    word = word[: -len(suf)]
            break

    # step 5
    if word.endswith("e"):
        if len(word) - 1 >= r2:
            word = word[:-1]
        elif len(word) - 1 >= r1 and not _ends_in_short_syllable(word[:-1]):
            word = word[:-1]
    elif word.endswith("l"):
        if len(word) - 1 >= r2 and word[-2:-1] == "l":
            word = word[:-1]

    return word.replace("Y", "y")
