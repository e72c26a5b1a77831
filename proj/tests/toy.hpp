#pragma once

#include "protosum/abstractor.hpp"
#include "protosum/corpus.hpp"

namespace toy {

inline protosum::AbstractorConfig config() {
    protosum::AbstractorConfig c;
    c.n_blocks = 1;
    c.n_heads = 2;
    c.d_word = 8;
    c.d_model = 8;
    c.ffn_width = 16;
    c.max_decode_len = 12;
    c.max_source_len = 20;
    return c;
}

// Output vocabulary {a, b, c, z}; the source also holds d and e, which can only be copied.
inline protosum::Vocabularies vocabs() {
    using protosum::Vocabulary;
    return {Vocabulary::from_tokens({"<pad>", "<unk>", "<bos>", "<eos>", "a", "b", "c", "d", "e"}),
            Vocabulary::from_tokens({"<pad>", "<unk>", "<bos>", "<eos>", "a", "b", "c", "z"})};
}

inline const protosum::Tokens kSource{"a", "b", "c", "d", "e"};
inline const protosum::Tokens kPrototype{"b", "c", "e"};

}  // namespace toy
