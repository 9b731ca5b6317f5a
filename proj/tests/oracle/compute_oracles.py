"""Reference values frozen into the unit tests, evaluated at 30 digits."""
import itertools
from mpmath import mp, mpf, e, exp, log, tanh

mp.dps = 30


def sigmoid(x):
    return 1 / (1 + exp(-x))


def show(name, value):
    print(f"{name} = {mp.nstr(value, 20)}")


# BM25: corpus {[x, y], [y]}, query [x], doc [x, y].
N, df, tf, dl, avg, k1, b = 2, 1, 1, 2, mpf(3) / 2, mpf("1.2"), mpf("0.75")
idf = log(1 + (N - df + mpf("0.5")) / (df + mpf("0.5")))
show("bm25_example", idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avg)))

# TF-IDF: corpus {[x], [y]}, query [x, x], doc [x, x, x].
show("tfidf_example", 3 * log(mpf(2) / 1))

# Column softmax of [1, 2, 3].
z = sum(exp(k) for k in (1, 2, 3))
for k in (1, 2, 3):
    show(f"softmax_{k}", exp(k) / z)

show("sigmoid_1", sigmoid(1))
show("sigmoid_2", sigmoid(2))
show("sigmoid_neg1", sigmoid(-1))

# Bank mixture: vectors (1,0), (0,1), (1,1); logits (1, 0, 1).
den = 2 * e + 1
show("mix_0", (e * 1 + 1 * 0 + e * 1) / den)
show("mix_1", (e * 0 + 1 * 1 + e * 1) / den)

# One LSTM step, hidden 1, input 1, zero initial state.
# Gate rows i, f, g, o.
x = mpf("0.7")
W = [mpf("0.5"), mpf("-0.3"), mpf("0.8"), mpf("0.2")]
bias = [mpf("0.1"), mpf("0.2"), mpf("-0.1"), mpf("0.3")]
i = sigmoid(W[0] * x + bias[0])
f = sigmoid(W[1] * x + bias[1])
g = tanh(W[2] * x + bias[2])
o = sigmoid(W[3] * x + bias[3])
c = f * 0 + i * g
show("lstm_h", o * tanh(c))

# Two LSTM steps with a recurrent weight, inputs 0.7 then -0.4.
U = [mpf("0.3"), mpf("0.6"), mpf("-0.5"), mpf("0.4")]
h, c = mpf(0), mpf(0)
states = []
for xt in (mpf("0.7"), mpf("-0.4")):
    pre = [W[k] * xt + U[k] * h + bias[k] for k in range(4)]
    i, f, g, o = sigmoid(pre[0]), sigmoid(pre[1]), tanh(pre[2]), sigmoid(pre[3])
    c = f * c + i * g
    h = o * tanh(c)
    states.append(h)
show("lstm_fwd_t0", states[0])
show("lstm_fwd_t1", states[1])
h, c = mpf(0), mpf(0)
rev = []
for xt in (mpf("-0.4"), mpf("0.7")):
    pre = [W[k] * xt + U[k] * h + bias[k] for k in range(4)]
    i, f, g, o = sigmoid(pre[0]), sigmoid(pre[1]), tanh(pre[2]), sigmoid(pre[3])
    c = f * c + i * g
    h = o * tanh(c)
    rev.append(h)
show("lstm_bwd_t1", rev[0])
show("lstm_bwd_t0", rev[1])

# Adam, scalar, theta0 = 1, gradients 0.5 then -0.3.
lr, b1, b2, eps = mpf("0.001"), mpf("0.9"), mpf("0.999"), mpf("1e-8")
theta, m, v = mpf(1), mpf(0), mpf(0)
for t, grad in enumerate((mpf("0.5"), mpf("-0.3")), start=1):
    m = b1 * m + (1 - b1) * grad
    v = b2 * v + (1 - b2) * grad * grad
    mhat = m / (1 - b1 ** t)
    vhat = v / (1 - b2 ** t)
    theta = theta - lr * mhat / (mp.sqrt(vhat) + eps)
    show(f"adam_theta_{t}", theta)

# Greedy vs enumeration for scores (0.1, 0.9, 0.5, 0.3).
s = [mpf("0.1"), mpf("0.9"), mpf("0.5"), mpf("0.3")]
R = [[mpf("0.5") if a == bb else sigmoid(s[a] - s[bb]) for bb in range(4)] for a in range(4)]
rows = [sum(r) for r in R]
order = sorted(range(4), key=lambda k: (-rows[k], k))
rank = [0] * 4
for pos, k in enumerate(order):
    rank[k] = pos + 1
print("greedy_rank =", rank)
wins = lambda a, bb: 1 if R[a][bb] > R[bb][a] else 0
best = max(itertools.permutations(range(4)), key=lambda p: (sum(wins(p[k], p[k + 1]) for k in range(3)), [-x for x in p]))
print("enumeration_order =", list(best), "sum =", sum(wins(best[k], best[k + 1]) for k in range(3)))

# 3-cycle 0>1, 1>2, 2>0.
cyc = {(0, 1), (1, 2), (2, 0)}
w = lambda a, bb: 1 if (a, bb) in cyc else 0
perms = sorted(itertools.permutations(range(3)))
top = max(sum(w(p[k], p[k + 1]) for k in range(2)) for p in perms)
print("cycle_best_sum =", top, "first_path =", [p for p in perms if sum(w(p[k], p[k + 1]) for k in range(2)) == top][0])
viol = sum(1 for a, bb, c in itertools.permutations(range(3), 3) if w(a, bb) and w(bb, c) and not w(a, c))
print("cycle_violations =", viol)

show("mrr_random_h10", sum(mpf(1) / k for k in range(1, 11)) / 10)
show("ln2", log(2))
