#include "qrd/vocab.hpp"

#include <stdexcept>

namespace qrd {

int Vocabulary::add(const std::string& name) {
    int id = static_cast<int>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
}

Vocabulary::Vocabulary() {
    add("<bos>");
    add("<eos>");
    add("<pad>");
    add("<sep>");
    for (int i = 4; i < kReserved; ++i) add("<res" + std::to_string(i) + ">");

    // task keywords and operators
    for (const char* t : {"mod", "list", "date", "fact"}) add(t);
    for (const char* t : {"plus", "times", "rev", "sort", "offset", "hop"}) add(t);

    digit0_ = size();
    for (int d = 0; d < 10; ++d) add(std::to_string(d));
    day0_ = size();
    for (int d = 0; d < 7; ++d) add("day" + std::to_string(d));

    style0_ = size();
    for (const char* t :
         {"sty_vanilla", "sty_cot", "sty_tot", "sty_program", "sty_backward", "sty_factrtr"})
        add(t);

    for (const char* t : {"step", "therefore", "answer", "branch", "join", "def", "ret", "given",
                          "recall", "check"})
        add(t);

    ent0_ = size();
    for (int e = 0; e < kEntities; ++e) add("e" + std::to_string(e));
    rel0_ = size();
    for (int r = 0; r < kRelations; ++r) add("r" + std::to_string(r));

    pat_a0_ = size();
    for (int i = 0; i < kPatternA; ++i) add("pa" + std::to_string(i));
    pat_b0_ = size();
    for (int i = 0; i < kPatternB; ++i) add("pb" + std::to_string(i));

    while (size() < 512) add("<fill" + std::to_string(size()) + ">");
}

int Vocabulary::id(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) throw std::out_of_range("vocab: unknown token '" + name + "'");
    return it->second;
}

const std::string& Vocabulary::name(int id) const {
    if (id < 0 || id >= size())
        throw std::out_of_range("vocab: id " + std::to_string(id) + " outside vocabulary");
    return names_[id];
}

const Vocabulary& vocab() {
    static const Vocabulary v;
    return v;
}

}  // namespace qrd
