#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the bundled data files under data/.

Inputs: a plain list of sayings ("riddle——explanation" per line), pypinyin
and jieba. Outputs:
  data/sayings_500.jsonl    corpus fixture
  data/pinyin_lexicon.tsv   key<TAB>reading[,reading...]
  data/words.tsv            word<TAB>freq<TAB>pos (segmenter dictionary)

Usage: build_data.py SAYINGS_TXT OUT_DIR
"""
import json
import os
import re
import sys
import unicodedata

import jieba
from pypinyin import pinyin_dict, phrases_dict

FIXTURE_SIZE = 500
MAX_WORD_LENGTH = 3
MIN_WORD_FREQ = 100

# jieba tags a few riddle-initial verb phrases as nouns.
POS_OVERRIDES = {"救人": "v", "打水": "v", "拜年": "v", "过河": "v", "过街": "v",
                 "照镜子": "v", "搬家": "v", "念经": "v", "打伞": "v"}

SKIP_RIDDLES = {"清明的螃蟹", "和尚分家", "猪八戒摔耙子", "一二三五六"}


def strip_tone(s):
    s = s.replace("ü", "v")
    return "".join(c for c in unicodedata.normalize("NFD", s)
                   if not unicodedata.combining(c)).replace("ü", "v")


def load_sayings(path):
    seen, out = set(), []
    for line in open(path, encoding="utf8"):
        line = line.strip()
        if not line:
            continue
        riddle, explanation = line.split("——")
        if riddle in seen or riddle in SKIP_RIDDLES:
            continue
        seen.add(riddle)
        out.append({"riddle": riddle, "explanation": explanation})
    return out[:FIXTURE_SIZE]


def main(src, out_dir):
    sayings = load_sayings(src)
    with open(os.path.join(out_dir, "sayings_500.jsonl"), "w", encoding="utf8") as f:
        for s in sayings:
            f.write(json.dumps(s, ensure_ascii=False) + "\n")
    corpus_text = "\n".join(s["riddle"] + "\n" + re.sub(r"（.*?）", "", s["explanation"])
                            for s in sayings)

    chars = {cp: r for cp, r in pinyin_dict.pinyin_dict.items() if cp >= 0x3400}
    defaults = {chr(cp): strip_tone(r.split(",")[0]) for cp, r in chars.items()}
    with open(os.path.join(out_dir, "pinyin_lexicon.tsv"), "w", encoding="utf8") as f:
        for cp in sorted(chars):
            f.write(f"{chr(cp)}\t{chars[cp]}\n")
        for word in sorted(phrases_dict.phrases_dict):
            readings = [r[0] for r in phrases_dict.phrases_dict[word]]
            if len(word) < 2 or len(readings) != len(word):
                continue
            if all(defaults.get(c) == strip_tone(r) for c, r in zip(word, readings)):
                continue
            f.write(f"{word}\t{' '.join(readings)}\n")

    dict_path = os.path.join(os.path.dirname(jieba.__file__), "dict.txt")
    with open(dict_path, encoding="utf8") as src_dict, \
            open(os.path.join(out_dir, "words.tsv"), "w", encoding="utf8") as f:
        for line in src_dict:
            word, freq, pos = line.split()
            # idioms and whole sayings would swallow the subject
            if len(word) > MAX_WORD_LENGTH:
                continue
            if int(freq) < MIN_WORD_FREQ and word not in corpus_text:
                continue
            pos = POS_OVERRIDES.get(word, pos)
            f.write(f"{word}\t{freq}\t{pos}\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
