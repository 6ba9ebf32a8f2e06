#pragma once

// Slot assignment for the cooperative burst schedule.
//
// User i (1-based) sends codeword K on slots (K-1)*N_u + i .. + N_b - 1,
// burst j of the codeword in the j-th slot of that range. Slots are taken
// modulo the N_u-slot period (steady state), so every slot carries exactly
// N_b bursts with distinct burst indices 1..N_b. N_b = 1 degenerates to
// TDMA. Users and slots are 1-indexed.

#include <stdexcept>
#include <vector>

namespace pncsim {

struct SchemeParams {
    int num_users = 4;           // N_u >= 2
    int bursts_per_codeword = 2; // N_b, 1 <= N_b <= N_u

    void validate() const {
        if (num_users < 2) throw std::invalid_argument("SchemeParams: need at least 2 users");
        if (bursts_per_codeword < 1 || bursts_per_codeword > num_users)
            throw std::invalid_argument("SchemeParams: need 1 <= N_b <= N_u");
    }
};

struct SlotRange {
    long first = 0;
    long last = 0;
    long length() const { return last - first + 1; }
};

struct SlotEntry {
    int user = 0;
    int burst_index = 0;  // 1..N_b; the user transmits with energy rho_b * E_s
};

struct SlotAssignment {
    long slot = 0;
    std::vector<SlotEntry> entries;  // ascending burst index
};

// Slot range carrying codeword K of user i.
inline SlotRange slots_for_codeword(int user, long codeword, const SchemeParams& p) {
    p.validate();
    if (user < 1 || user > p.num_users) throw std::invalid_argument("slots_for_codeword: user out of range");
    if (codeword < 1) throw std::invalid_argument("slots_for_codeword: codeword index must be >= 1");
    const long first = (codeword - 1) * p.num_users + user;
    return SlotRange{first, first + p.bursts_per_codeword - 1};
}

// All transmitters active on a slot in the cyclic steady state.
inline SlotAssignment transmitters_on_slot(long slot, const SchemeParams& p) {
    p.validate();
    if (slot < 1) throw std::invalid_argument("transmitters_on_slot: slots are 1-based");
    SlotAssignment a;
    a.slot = slot;
    a.entries.reserve(static_cast<size_t>(p.bursts_per_codeword));
    for (int j = 0; j < p.bursts_per_codeword; ++j) {
        // Burst j+1 on this slot belongs to the user that started j slots ago.
        long u = (slot - 1 - j) % p.num_users;
        if (u < 0) u += p.num_users;
        a.entries.push_back(SlotEntry{static_cast<int>(u) + 1, j + 1});
    }
    return a;
}

// The slots user i's listener must watch for codeword K: identical to the
// transmit range.
inline SlotRange receiver_slots(int user, long codeword, const SchemeParams& p) {
    return slots_for_codeword(user, codeword, p);
}

// The intended listener of user i is user i+1 (modulo N_u, mapping 0 to N_u).
inline int listener_of(int user, const SchemeParams& p) {
    p.validate();
    if (user < 1 || user > p.num_users) throw std::invalid_argument("listener_of: user out of range");
    return user % p.num_users + 1;
}

}  // namespace pncsim
