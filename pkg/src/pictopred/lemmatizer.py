"""Rule- and dictionary-based Portuguese lemmatizer.

Best-effort lemmatization good enough to map everyday AAC sentences onto
keyword lemmas: an irregular-form dictionary for the high-frequency verbs,
suffix rules for regular conjugations, and plural stripping for nouns.
Anything the rules do not recognize passes through unchanged, which is the
right failure mode for lemma lookup (an unknown surface form simply stays
out of vocabulary).

Any ``word -> lemma`` callable can be plugged in instead; see
``DictLemmatizer`` for a deterministic test double.
"""

from __future__ import annotations

# Closed-class words are never stemmed: articles, prepositions,
# contractions, pronouns, and other function words.
FUNCTION_WORDS = frozenset(
    """
    a o as os um uma uns umas
    de do da dos das dum duma
    em no na nos nas num numa
    por pelo pela pelos pelas
    para pra pro com sem sob sobre entre até
    ao aos à às aonde onde
    que quem qual quais quando porque porquê se não sim
    e ou mas nem também já ainda só muito pouco mais menos bem mal
    eu tu ele ela nós vós eles elas você vocês
    me te lhe lhes nos vos mim ti si comigo contigo conosco
    meu minha meus minhas teu tua teus tuas seu sua seus suas
    nosso nossa nossos nossas dele dela deles delas
    este esta estes estas esse essa esses essas isto isso aquilo
    aquele aquela aqueles aquelas neste nesta nesse nessa nisso nisto
    aqui ali lá cá hoje ontem amanhã agora depois antes sempre nunca
    """.split()
)

# High-frequency irregular verb forms -> infinitive. Covers the verbs that
# dominate child-directed and AAC speech.
IRREGULAR_FORMS = {
    # ser
    "sou": "ser", "és": "ser", "é": "ser", "somos": "ser", "são": "ser",
    "era": "ser", "eram": "ser", "foste": "ser", "fomos": "ser", "foram": "ser",
    "seja": "ser", "sido": "ser",
    # estar
    "estou": "estar", "está": "estar", "estás": "estar", "estamos": "estar",
    "estão": "estar", "estava": "estar", "estavam": "estar", "esteve": "estar",
    "estive": "estar", "estado": "estar",
    # ir ("fui"/"foi" are shared with ser; the motion reading dominates AAC data)
    "vou": "ir", "vai": "ir", "vais": "ir", "vamos": "ir", "vão": "ir",
    "fui": "ir", "foi": "ir", "ia": "ir", "iam": "ir", "ido": "ir",
    # ter
    "tenho": "ter", "tem": "ter", "tens": "ter", "temos": "ter", "têm": "ter",
    "tinha": "ter", "tinham": "ter", "teve": "ter", "tive": "ter", "tido": "ter",
    # fazer
    "faço": "fazer", "faz": "fazer", "fazes": "fazer", "fazemos": "fazer",
    "fazem": "fazer", "fez": "fazer", "fiz": "fazer", "fazia": "fazer",
    "feito": "fazer",
    # querer
    "quero": "querer", "quer": "querer", "queres": "querer",
    "queremos": "querer", "querem": "querer", "queria": "querer",
    "queriam": "querer", "quis": "querer", "quisesse": "querer",
    # poder
    "posso": "poder", "pode": "poder", "podes": "poder", "podemos": "poder",
    "podem": "poder", "podia": "poder", "pôde": "poder", "pude": "poder",
    # ver
    "vejo": "ver", "vê": "ver", "vês": "ver", "vemos": "ver", "veem": "ver",
    "vi": "ver", "viu": "ver", "via": "ver", "visto": "ver",
    # vir
    "venho": "vir", "vem": "vir", "vens": "vir", "vimos": "vir", "vêm": "vir",
    "veio": "vir", "vim": "vir", "vinha": "vir", "vindo": "vir",
    # dar
    "dou": "dar", "dá": "dar", "dás": "dar", "damos": "dar", "dão": "dar",
    "deu": "dar", "dei": "dar", "dava": "dar", "dado": "dar",
    # dizer
    "digo": "dizer", "diz": "dizer", "dizes": "dizer", "dizemos": "dizer",
    "dizem": "dizer", "disse": "dizer", "dizia": "dizer", "dito": "dizer",
    # saber
    "sei": "saber", "sabe": "saber", "sabes": "saber", "sabemos": "saber",
    "sabem": "saber", "soube": "saber", "sabia": "saber",
    # gostar (regular but ubiquitous; listed to survive rule changes)
    "gosto": "gostar", "gosta": "gostar", "gostamos": "gostar",
    "gostam": "gostar", "gostei": "gostar", "gostou": "gostar",
    # comer / beber / dormir frequent forms
    "como": "comer", "come": "comer", "comi": "comer", "comeu": "comer",
    "comemos": "comer", "comia": "comer",
    "bebo": "beber", "bebe": "beber", "bebi": "beber", "bebeu": "beber",
    "durmo": "dormir", "dorme": "dormir", "dormi": "dormir", "dormiu": "dormir",
}

# Regular conjugation endings -> infinitive ending, tried longest first.
# Each rule requires the remaining stem to keep at least ``min_stem`` chars.
_VERB_RULES = (
    ("aremos", "ar", 2), ("eremos", "er", 2), ("iremos", "ir", 2),
    ("ássemos", "ar", 2), ("êssemos", "er", 2), ("íssemos", "ir", 2),
    ("aram", "ar", 2), ("eram", "er", 2), ("iram", "ir", 2),
    ("ando", "ar", 2), ("endo", "er", 2), ("indo", "ir", 2),
    ("amos", "ar", 2), ("emos", "er", 2), ("imos", "ir", 2),
    ("asse", "ar", 2), ("esse", "er", 2), ("isse", "ir", 2),
    ("arei", "ar", 2), ("erei", "er", 2), ("irei", "ir", 2),
    ("ará", "ar", 2), ("erá", "er", 2), ("irá", "ir", 2),
    ("ava", "ar", 2), ("avam", "ar", 2),
    ("ei", "ar", 2), ("ou", "ar", 2), ("eu", "er", 2), ("iu", "ir", 2),
)

# Plural endings -> singular replacement.
_PLURAL_RULES = (
    ("ções", "ção", 2), ("sões", "são", 2), ("ões", "ão", 2), ("ães", "ão", 2),
    ("ais", "al", 2), ("éis", "el", 2), ("óis", "ol", 2), ("res", "r", 3),
    ("zes", "z", 2), ("ns", "m", 2), ("s", "", 3),
)

_INFINITIVE_ENDINGS = ("ar", "er", "ir", "or")

# Common nouns the suffix rules would mangle.
_RULE_EXCEPTIONS = frozenset(
    "museu chapéu troféu judeu europeu céu véu "
    "lápis ônibus óculos pires tênis vírus bônus".split()
)


def _fix_stem(stem: str, repl: str) -> str:
    # Orthographic alternations of -car/-gar verbs: brinquei -> brincar,
    # cheguei -> chegar.
    if repl == "ar":
        if stem.endswith("qu"):
            return stem[:-2] + "c"
        if stem.endswith("gu"):
            return stem[:-1]
    return stem


def lemmatize(word: str) -> str:
    """Map one surface form to its lemma (lowercased, diacritics kept)."""
    word = word.strip().lower()
    if not word:
        return word
    if word in FUNCTION_WORDS or word in _RULE_EXCEPTIONS:
        return word
    if word in IRREGULAR_FORMS:
        return IRREGULAR_FORMS[word]
    # Infinitives (and nouns that merely look like them) pass through.
    if len(word) > 3 and word.endswith(_INFINITIVE_ENDINGS):
        return word
    for ending, repl, min_stem in _VERB_RULES:
        if word.endswith(ending) and len(word) - len(ending) >= min_stem:
            return _fix_stem(word[: -len(ending)], repl) + repl
    for ending, repl, min_stem in _PLURAL_RULES:
        if word.endswith(ending) and len(word) - len(ending) >= min_stem:
            return word[: -len(ending)] + repl
    return word


def identity_lemmatizer(word: str) -> str:
    """No-op lemmatizer for already-lemmatized input."""
    return word.strip().lower()


class DictLemmatizer:
    """Deterministic lookup lemmatizer, mainly for tests and custom tables."""

    def __init__(self, mapping: dict[str, str], default=None):
        self.mapping = dict(mapping)
        self.default = default or identity_lemmatizer

    def __call__(self, word: str) -> str:
        word = word.strip().lower()
        return self.mapping.get(word, self.default(word))
