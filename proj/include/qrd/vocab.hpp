#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace qrd {

// Closed 512-symbol vocabulary shared by the corpus generator and the
// students. Layout is fixed at construction so token ids are stable across
// runs and platforms.
class Vocabulary {
public:
    static constexpr int kBos = 0;
    static constexpr int kEos = 1;
    static constexpr int kPad = 2;
    static constexpr int kSep = 3;
    static constexpr int kReserved = 8;

    Vocabulary();

    int size() const { return static_cast<int>(names_.size()); }
    int id(const std::string& name) const;
    bool contains(const std::string& name) const { return ids_.count(name) > 0; }
    const std::string& name(int id) const;

    // Token groups used by the generator.
    int digit(int d) const { return digit0_ + d; }            // 0..9
    int day(int d) const { return day0_ + d; }                // 0..6
    int entity(int e) const { return ent0_ + e; }             // 0..kEntities-1
    int relation(int r) const { return rel0_ + r; }           // 0..kRelations-1
    int pattern_a(int i) const { return pat_a0_ + i; }
    int pattern_b(int i) const { return pat_b0_ + i; }
    int style_token(int style_index) const { return style0_ + style_index; }

    bool is_pattern_a(int id) const { return id >= pat_a0_ && id < pat_a0_ + kPatternA; }
    bool is_pattern_b(int id) const { return id >= pat_b0_ && id < pat_b0_ + kPatternB; }

    static constexpr int kEntities = 32;
    static constexpr int kRelations = 4;
    static constexpr int kPatternA = 160;
    static constexpr int kPatternB = 160;

private:
    int add(const std::string& name);
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> ids_;
    int digit0_ = 0, day0_ = 0, ent0_ = 0, rel0_ = 0, pat_a0_ = 0, pat_b0_ = 0, style0_ = 0;
};

// Process-wide immutable instance.
const Vocabulary& vocab();

}  // namespace qrd
