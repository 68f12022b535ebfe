#pragma once

#include <array>
#include <string_view>

namespace refdedup {

// Word pool for synthetic titles. Rhymes and near spellings give the
// confusion channel real-word substitutes.
inline constexpr std::array<std::string_view, 317> kTitleVocabulary = {
    "man", "men", "moon", "mood", "night", "light", "fight", "might", "knight",
    "sight", "bright", "dark", "park", "bark", "lark", "star", "stair",
    "stars", "war", "wars", "ward", "time", "times", "tiny", "tin", "town",
    "down", "gown", "crown", "brown", "blue", "glue", "clue", "true", "dream",
    "cream", "stream", "steam", "team", "storm", "fire", "hire", "wire",
    "tire", "ice", "dice", "rice", "nice", "mice", "love", "glove", "dove",
    "life", "wife", "knife", "strife", "king", "ring", "wing", "sing", "thing",
    "kings", "queen", "green", "seen", "screen", "road", "toad", "load",
    "rose", "nose", "hose", "house", "mouse", "home", "dome", "rome", "stone",
    "bone", "phone", "lone", "zone", "gold", "cold", "bold", "hold", "old",
    "fold", "river", "liver", "shiver", "silver", "sea", "tea", "key", "bay",
    "day", "way", "may", "say", "play", "pray", "gray", "grey", "ray", "heart",
    "hard", "art", "part", "cart", "start", "sun", "son", "run", "fun", "gun",
    "nun", "bun", "rain", "train", "brain", "chain", "plain", "lost", "cost",
    "frost", "host", "ghost", "most", "post", "coast", "boast", "wild",
    "child", "mild", "hill", "will", "still", "kill", "mill", "fall", "ball",
    "call", "hall", "wall", "tall", "blood", "flood", "wood", "good", "hood",
    "food", "lake", "cake", "make", "take", "wake", "snake", "city", "pity",
    "dirty", "thirty", "forty", "party", "black", "back", "pack", "track",
    "crack", "shack", "attack", "death", "breath", "dead", "head", "bread",
    "red", "bed", "fred", "girl", "world", "pearl", "whirl", "boy", "toy",
    "joy", "roy", "angel", "angels", "danger", "stranger", "ranger", "secret",
    "silent", "island", "highland", "legend", "legends", "ocean", "motion",
    "potion", "nation", "station", "shadow", "meadow", "window", "widow",
    "summer", "winter", "hunter", "dinner", "sinner", "thunder", "wonder",
    "under", "last", "past", "fast", "cast", "vast", "mast", "blast", "edge",
    "hedge", "bridge", "ridge", "fridge", "lion", "line", "mine", "pine",
    "wine", "nine", "fine", "gate", "late", "fate", "date", "mate", "plate",
    "state", "hope", "rope", "cope", "dope", "beach", "peach", "reach",
    "teach", "jungle", "bungle", "rumble", "tumble", "archive", "arcade",
    "escape", "shape", "grape", "tape", "cape", "empire", "vampire", "mission",
    "vision", "fusion", "planet", "plan", "clan", "miracle", "oracle",
    "paradise", "tiger", "timer", "dragon", "wagon", "hero", "zero", "eagle",
    "beagle", "devil", "level", "spirit", "echo", "journey", "garden",
    "friday", "monday", "sunday", "paris", "texas", "alien", "robot", "rocket",
    "pocket", "magic", "west", "east", "north", "south", "brother", "mother",
    "father", "sister", "cowboy", "pirate", "saint", "paint", "faint", "crime",
    "prime", "killer", "thriller", "justice", "puzzle", "circus", "temple",
    "simple"};

}  // namespace refdedup
