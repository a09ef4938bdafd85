# Independent closed-form oracles for frozen test values. Run: python3 closed_forms.py
import math

sig = lambda x: 1.0 / (1.0 + math.exp(-x))
print("sigmoid(0.5)      = %.15f" % sig(0.5))
print("tanh(0.5)         = %.15f" % math.tanh(0.5))
print("0.5*tanh(1)       = %.15f" % (0.5 * math.tanh(1.0)))

# scalar cell: input 1, h_prev 0, c_prev 0, every W = [0.5, 0.5], b = 0
pre = 0.5 * 0.0 + 0.5 * 1.0
f = i = o = sig(pre)
cand = math.tanh(pre)
c = f * 0.0 + i * cand
h = o * math.tanh(c)
print("cell gate=%.15f cand=%.15f c=%.15f h=%.15f" % (f, cand, c, h))

print("ln(101)           = %.15f" % math.log(101))
print("softmax(ln1,ln2,ln3) =", [k / 6 for k in (1, 2, 3)])

def lstm_params(inp, hid):
    return 4 * (hid * (inp + hid) + hid)
print("dir-layer 512/512 =", lstm_params(512, 512))
print("head 512-256-101  =", (512 * 256 + 256) + (256 * 101 + 101))

def ctx_params(inp, hid, blocks, layers, bidir, fc1, classes):
    dirs = 2 if bidir else 1
    total = 0
    for b in range(blocks):
        for l in range(layers):
            i = inp if (b == 0 and l == 0) else hid
            total += dirs * lstm_params(i, hid)
    total += (blocks - 1) * 2 * hid          # BN gamma/beta
    total += (hid * fc1 + fc1) + (fc1 * classes + classes)
    return total
print("ctx default params =", ctx_params(512, 512, 3, 3, True, 256, 101))
print("baseline params    =", ctx_params(512, 512, 1, 3, False, 256, 101))

# FLOP model: cell step 8h(in+h)+10h; bidirectional sum h per layer-step;
# junction relu L*h + bn 4*L*h + pool L'*k*h; head 2*h*f1+f1 (+f1 relu) + 2*f1*C+C.
def pooled(L, k, s):
    return (L - k) // s + 1

def ctx_flops(T, inp, hid, blocks, layers, bidir, fc1, classes, pool, k=2, s=2, readout="last"):
    dirs = 2 if bidir else 1
    total = 0
    L = T
    for b in range(blocks):
        for l in range(layers):
            i = inp if (b == 0 and l == 0) else hid
            total += dirs * L * (8 * hid * (i + hid) + 10 * hid)
            if bidir:
                total += L * hid
        if b + 1 < blocks:
            total += L * hid + 4 * L * hid
            if pool:
                Ln = pooled(L, k, s)
                total += Ln * k * hid
                L = Ln
    if readout == "mean":
        total += L * hid
    total += 2 * hid * fc1 + fc1 + fc1 + 2 * fc1 * classes + classes
    return total

a = ctx_flops(32, 512, 512, 3, 3, True, 256, 101, True)
b = ctx_flops(32, 512, 512, 3, 3, True, 256, 101, False)
print("ctx flops T=32 pool    =", a)
print("ctx flops T=32 no pool =", b)
print("ratio                  = %.15f" % (a / b))
print("baseline flops T=32    =", ctx_flops(32, 512, 512, 1, 3, False, 256, 101, False))
# one unidirectional layer, T steps, head
print("one layer in=4 h=8 T=5 fc1=6 C=3 =", ctx_flops(5, 4, 8, 1, 1, False, 6, 3, False))
