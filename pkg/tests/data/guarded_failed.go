package main

var c = make(chan int, 2)
var d = make(chan int, 0)
var e = make(chan int, 0)

func main() {
	go A()
	go B()
	go C()
}

func A() {
	c <- 1
	e <- 0 // wrong rendezvous channel
}

func B() {
	<-c
	<-d
	// missing: e <- 0 ; c <- 2
}

func C() {
	<-e
	<-c
}
